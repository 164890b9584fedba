"""Semi-Lagrangian DG sweeps for constant-speed 1D advection.

A line of cells advected by speed a over a step dt is updated as

    out[i] = A(alpha) u[i + istar] + B(alpha) u[i + istar + 1],
    -a dt = dx (istar + alpha),  0 <= alpha < 1,

where A, B hold the L2 projection of the shifted piecewise polynomial onto
the output cell.  Reads outside the domain return zero (no inflow).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _kernels, limiters
from .adaptivity import GhostWidthError, block_ghosts, from_x_lines, required_ghost_width, x_lines
from .dg_core import NodalField, ReferenceBasis, reference_basis


class ShiftDecomposition(NamedTuple):
    istar: int
    alpha: float


class ShiftMatrices(NamedTuple):
    A: np.ndarray
    B: np.ndarray


def decompose_shifts(speed, dt: float, dx: float):
    """Vectorised split of -speed*dt/dx into integer offset and fraction."""
    if not dx > 0:
        raise ValueError("cell width must be positive")
    s = -np.asarray(speed, dtype=float) * dt / dx
    istar = np.floor(s)
    alpha = s - istar
    # floor of a value a hair below an integer can leave alpha == 1.0
    wrap = alpha >= 1.0
    istar = np.where(wrap, istar + 1, istar).astype(np.int64)
    alpha = np.where(wrap, 0.0, alpha)
    return istar, alpha


def decompose_shift(a: float, dt: float, dx: float) -> ShiftDecomposition:
    istar, alpha = decompose_shifts(a, dt, dx)
    return ShiftDecomposition(int(istar), float(alpha))


def build_matrices(basis: ReferenceBasis | int, alpha) -> ShiftMatrices:
    """Projection matrices A(alpha), B(alpha); broadcasts over alpha.

    A[n, m] = (1/w_n) int_0^{1-alpha} l_n(s) l_m(s + alpha) ds
    B[n, m] = (1/w_n) int_{1-alpha}^1 l_n(s) l_m(s + alpha - 1) ds
    """
    if isinstance(basis, (int, np.integer)):
        basis = reference_basis(int(basis))
    alpha = np.asarray(alpha, dtype=float)
    xi, w = basis.nodes, basis.weights

    def piece(a, b, shift):
        x = a[..., None] + (b - a)[..., None] * xi
        ln = basis.at(x)
        lm = basis.at(x + shift[..., None])
        M = np.einsum("q,...qn,...qm->...nm", w, ln, lm)
        return (b - a)[..., None, None] * M / w[:, None]

    zero, one = np.zeros_like(alpha), np.ones_like(alpha)
    return ShiftMatrices(piece(zero, one - alpha, alpha), piece(one - alpha, one, alpha - 1.0))


def _padded_source(u, istar, left, right, periodic):
    """Source array and per-lane offsets so that input cell i + istar sits
    at src[:, i + offset]."""
    L, N, K = u.shape
    if periodic:
        return u, istar % N
    G = int(max(0, -istar.min(), istar.max() + 1)) if L else 0
    gl = left.shape[1] if left is not None else 0
    gr = right.shape[1] if right is not None else 0
    if left is not None and -istar.min() > gl:
        raise GhostWidthError(int(-istar.min()), gl)
    if right is not None and istar.max() + 1 > gr:
        raise GhostWidthError(int(istar.max() + 1), gr)
    pad_l = left if left is not None else np.zeros((L, G, K))
    pad_r = right if right is not None else np.zeros((L, G, K))
    # only the ghost cells within reach are needed
    pad_l = pad_l[:, pad_l.shape[1] - G:] if pad_l.shape[1] >= G else np.concatenate(
        [np.zeros((L, G - pad_l.shape[1], K)), pad_l], axis=1)
    pad_r = pad_r[:, :G] if pad_r.shape[1] >= G else np.concatenate(
        [pad_r, np.zeros((L, G - pad_r.shape[1], K))], axis=1)
    return np.concatenate([pad_l, u, pad_r], axis=1), istar + G


_ext_store: dict = {}


def _extension_tables(K: int, alpha: np.ndarray):
    """Integrals of the basis over I_l and I_r relative to the output cell.

    x sweeps repeat the same shifts every step, so the tables are kept.
    """
    key = (K, alpha.tobytes())
    hit = _ext_store.get(key)
    if hit is None:
        b = reference_basis(K - 1)
        hit = (np.ascontiguousarray(b.integrals(-alpha, 1.0 - alpha)),
               np.ascontiguousarray(b.integrals(1.0 - alpha, 2.0 - alpha)))
        if len(_ext_store) >= 64:
            _ext_store.pop(next(iter(_ext_store)))
        _ext_store[key] = hit
    return hit


def _check_lines(u):
    u = np.asarray(u, dtype=float)
    if u.ndim != 3 or u.shape[1] < 1:
        raise ValueError("a line needs at least one cell")
    return u


def sweep_lines(u, istar, mats: ShiftMatrices, alpha=None, *, left=None, right=None,
                periodic=False, limiter: limiters.LimiterConfig | None = None,
                stats: limiters.SweepStats | None = None, tag: str = "sweep"):
    """Advance a batch of lines.

    u: (L, N, K) nodal values; istar: (L,) offsets; mats: (L, K, K) pairs.
    `left`/`right` are optional ghost cells (L, G, K) standing in for the
    cells beyond each end (zeros when omitted).  With `limiter.inline` the
    inline indicator/modifier runs on every output cell.
    """
    u = _check_lines(u)
    L, N, K = u.shape
    istar = np.asarray(istar, dtype=np.int64)
    src, offset = _padded_source(u, istar, left, right, periodic)
    src = np.ascontiguousarray(src)
    A = np.ascontiguousarray(np.broadcast_to(mats.A, (L, K, K)))
    B = np.ascontiguousarray(np.broadcast_to(mats.B, (L, K, K)))
    out = np.empty_like(u)
    if limiter is None or not limiter.inline:
        _kernels.sweep(src, offset, A, B, out, periodic)
        return out
    if alpha is None:
        raise ValueError("the inline limiter needs the fractional shifts")
    alpha = np.ascontiguousarray(np.broadcast_to(np.asarray(alpha, float), (L,)))
    b = reference_basis(K - 1)
    ext_l, ext_r = _extension_tables(K, alpha)
    troubled = np.zeros(L, dtype=np.int64)
    outside = np.zeros(L, dtype=np.int64)
    src_mono = src @ b.to_monomial.T
    _kernels.sweep_inline(src, src_mono, offset, A, B, out, periodic, alpha, ext_l, ext_r,
                          b.weights, b.to_monomial, float(limiter.threshold), troubled, outside)
    if stats is not None:
        stats.add(tag, int(troubled.sum()))
        stats.outside_window += int(outside.sum())
    return out


def sweep_lines_reference(u, istar, mats: ShiftMatrices, alpha=None, *, left=None, right=None,
                          periodic=False, limiter: limiters.LimiterConfig | None = None):
    """Plain numpy version of `sweep_lines`; returns (out, troubled, outside)."""
    u = _check_lines(u)
    L, N, K = u.shape
    istar = np.asarray(istar, dtype=np.int64)
    src, offset = _padded_source(u, istar, left, right, periodic)
    lane = np.arange(L)[:, None]
    il = np.arange(N)[None, :] + offset[:, None]
    ir = il + 1
    if periodic:
        il, ir = il % N, ir % N
    ul, ur = src[lane, il], src[lane, ir]
    out = np.matmul(ul, np.swapaxes(mats.A, -1, -2)) + np.matmul(ur, np.swapaxes(mats.B, -1, -2))
    if limiter is None or not limiter.inline:
        return out, 0, 0
    if alpha is None:
        raise ValueError("the inline limiter needs the fractional shifts")
    return limiters.sldg_limit(ul, ur, out, np.asarray(alpha, float)[:, None], limiter.threshold)


def advect_line(line, shift: ShiftDecomposition, M: ShiftMatrices | None = None, *,
                periodic: bool = False, limiter: limiters.LimiterConfig | None = None):
    """Advance one line of cells (N, K) by a single shift."""
    line = _check_lines(np.asarray(line, dtype=float)[None])[0]
    if M is None:
        M = build_matrices(line.shape[1] - 1, shift.alpha)
    mats = ShiftMatrices(M.A[None], M.B[None])
    return sweep_lines(line[None], np.array([shift.istar]), mats, np.array([shift.alpha]),
                       periodic=periodic, limiter=limiter)[0]


class _MatrixCache:
    """Shift tables reused while the speeds of a sweep do not change."""

    def __init__(self, maxsize: int = 64):
        self._store: dict = {}
        self.maxsize = maxsize

    def get(self, k: int, speeds: np.ndarray, dt: float, dx: float):
        key = (k, dt, dx, speeds.tobytes())
        hit = self._store.get(key)
        if hit is None:
            istar, alpha = decompose_shifts(speeds, dt, dx)
            hit = (istar, alpha, build_matrices(k, alpha))
            if len(self._store) >= self.maxsize:
                self._store.pop(next(iter(self._store)))
            self._store[key] = hit
        return hit


_x_cache = _MatrixCache()


def advect_x(f: NodalField, tau: float, sqrt_mu: float = 1.0, *, periodic: bool = False,
             limiter: limiters.LimiterConfig | None = None, ghost_width: int | None = None,
             stats: limiters.SweepStats | None = None) -> NodalField:
    """x sweep with speed v / sqrt_mu at every v node.

    Each block is swept on its own; ghost cells from the neighbouring blocks
    are transferred to the block's cell width first.
    """
    if tau == 0:
        return f.replace(f.values.copy())
    speeds = (f.v.nodes(f.k) / sqrt_mu).ravel()
    lines = x_lines(f.values)
    out = np.empty_like(lines)
    single = len(f.x.blocks) == 1
    vmax = float(np.max(np.abs(speeds)))
    for b, (blk, sl) in enumerate(zip(f.x.blocks, f.x.block_slices())):
        istar, alpha, mats = _x_cache.get(f.k, speeds, tau, blk.dx)
        if single and periodic:
            out[:, sl] = sweep_lines(lines[:, sl], istar, mats, alpha, periodic=True,
                                     limiter=limiter, stats=stats, tag="x")
            continue
        need = required_ghost_width(vmax, tau, blk.dx)
        width = need if ghost_width is None else ghost_width
        if width < need:
            raise GhostWidthError(need, width)
        if single:
            left = right = None
        else:
            left, right = block_ghosts(lines, f.x, b, width, periodic)
        out[:, sl] = sweep_lines(lines[:, sl], istar, mats, alpha, left=left, right=right,
                                 limiter=limiter, stats=stats, tag="x")
    return f.replace(from_x_lines(out, f.v.n_cells))


def advect_v(f: NodalField, tau: float, E_nodes: np.ndarray, charge: float = -1.0,
             sqrt_mu: float = 1.0, *, periodic: bool = False,
             limiter: limiters.LimiterConfig | None = None,
             stats: limiters.SweepStats | None = None) -> NodalField:
    """v sweep with speed charge * E / sqrt_mu at every x node.

    E_nodes holds the field at the x nodes, shape (Nx, K).
    """
    if tau == 0 or not np.any(E_nodes):
        return f.replace(f.values.copy())
    nx, K, nv, _ = f.values.shape
    speeds = (charge * np.asarray(E_nodes, dtype=float) / sqrt_mu).ravel()
    istar, alpha = decompose_shifts(speeds, tau, f.v.blocks[0].dx)
    mats = build_matrices(f.k, alpha)
    lines = f.values.reshape(nx * K, nv, K)
    out = sweep_lines(lines, istar, mats, alpha, periodic=periodic, limiter=limiter,
                      stats=stats, tag="v")
    return f.replace(out.reshape(nx, K, nv, K))
