"""Compiled line kernels for the sLdG sweep, optionally fused with the
inline limiter.

These mirror `advection.sweep_lines` and `limiters.sldg_limit`, which stay
the readable reference; the test suite checks that both agree.
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is often too old; the portable layer avoids the warning
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

_N_SAMPLE = 33


def set_threads(n: int):
    """Number of workers used for the line-parallel loops."""
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def get_threads() -> int:
    return numba.get_num_threads()


@njit(cache=True, inline="always")
def _horner(c, x):
    k = c.shape[0] - 1
    v = c[k]
    for j in range(k - 1, -1, -1):
        v = v * x + c[j]
    return v


@njit(cache=True, inline="always")
def _clamp(r, a, b):
    # non-finite roots fall back to a
    if r >= a:
        return r if r <= b else b
    return a


@njit(cache=True, inline="always")
def _extrema(c, a, b):
    """Min and max over [a, b] of the polynomial with monomial coefficients c."""
    k = c.shape[0] - 1
    lo = _horner(c, a)
    hi = lo
    v = _horner(c, b)
    lo = min(lo, v)
    hi = max(hi, v)
    if k == 2:
        if c[2] != 0.0:
            r = -c[1] / (2.0 * c[2])
            if np.isfinite(r) and a <= r <= b:
                v = _horner(c, r)
                lo = min(lo, v)
                hi = max(hi, v)
    elif k == 3:
        # critical points are clamped into [a, b] rather than tested: any
        # point of the interval is a harmless extra sample, which keeps the
        # hot path branch-light
        A, B, C = 3.0 * c[3], 2.0 * c[2], c[1]
        sq = np.sqrt(max(B * B - 4.0 * A * C, 0.0))
        q = -0.5 * (B + sq) if B >= 0 else -0.5 * (B - sq)
        r1 = _clamp(q / A, a, b) if A != 0.0 else _clamp(-C / B, a, b) if B != 0.0 else a
        r2 = _clamp(C / q, a, b) if q != 0.0 else a
        v1 = _horner(c, r1)
        v2 = _horner(c, r2)
        lo = min(lo, min(v1, v2))
        hi = max(hi, max(v1, v2))
    elif k > 3:
        for q in range(_N_SAMPLE):
            s = 0.5 * (1.0 - np.cos(np.pi * (q + 0.5) / _N_SAMPLE))
            v = _horner(c, a + (b - a) * s)
            lo = min(lo, v)
            hi = max(hi, v)
    return lo, hi


@njit(cache=True, inline="always")
def _ratio(num, den):
    if den != 0.0:
        return abs(num / den)
    return 1.0


@njit(cache=True, parallel=True)
def sweep(src, offset, A, B, out, periodic):
    """out[l, i] = A[l] src[l, i + off] + B[l] src[l, i + off + 1]."""
    L, N, K = out.shape
    Ns = src.shape[1]
    for l in prange(L):
        for i in range(N):
            jl = i + offset[l]
            jr = jl + 1
            if periodic:
                jl %= Ns
                jr %= Ns
            for n in range(K):
                s = 0.0
                for m in range(K):
                    s += A[l, n, m] * src[l, jl, m] + B[l, n, m] * src[l, jr, m]
                out[l, i, n] = s


@njit(cache=True, parallel=True)
def sweep_inline(src, src_mono, offset, A, B, out, periodic, alpha, ext_l, ext_r, w, T,
                 threshold, troubled, outside):
    """`sweep` fused with the inline indicator and max-min modifier.

    src_mono holds the monomial coefficients of src (T maps nodal values to
    them); ext_l/ext_r (L, K) give the means of the extended output over
    I_l and I_r.  Per-lane troubled and outside-window counts are written
    to the two count arrays.
    """
    L, N, K = out.shape
    Ns = src.shape[1]
    for l in prange(L):
        c = np.empty(K)
        nt = 0
        no = 0
        al = alpha[l]
        for i in range(N):
            jl = i + offset[l]
            jr = jl + 1
            if periodic:
                jl %= Ns
                jr %= Ns
            ml = 0.0
            mr = 0.0
            epl = 0.0
            epr = 0.0
            mean = 0.0
            for n in range(K):
                s = 0.0
                for m in range(K):
                    s += A[l, n, m] * src[l, jl, m] + B[l, n, m] * src[l, jr, m]
                out[l, i, n] = s
                ml += w[n] * src[l, jl, n]
                mr += w[n] * src[l, jr, n]
                epl += ext_l[l, n] * s
                epr += ext_r[l, n] * s
                mean += w[n] * s
            den = max(abs(ml), abs(mr))
            if not den > 0.0:
                continue
            if not (abs(epl - ml) + abs(epr - mr)) / den > threshold:
                continue
            nt += 1
            for n in range(K):
                s = 0.0
                for m in range(K):
                    s += T[n, m] * out[l, i, m]
                c[n] = s
            pmin, pmax = _extrema(c, 0.0, 1.0)
            lmin, lmax = _extrema(src_mono[l, jl], al, 1.0)
            rmin, rmax = _extrema(src_mono[l, jr], 0.0, al)
            wmin = min(lmin, rmin)
            wmax = max(lmax, rmax)
            theta = min(min(_ratio(wmax - mean, pmax - mean), _ratio(wmin - mean, pmin - mean)), 1.0)
            for n in range(K):
                out[l, i, n] = theta * (out[l, i, n] - mean) + mean
            if mean > wmax or mean < wmin:
                no += 1
        troubled[l] = nt
        outside[l] = no
