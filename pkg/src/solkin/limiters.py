"""Troubled-cell indicators and modifiers.

All stencil functions work on nodal arrays of shape ``(..., k+1)`` and are
batched over the leading axes.  Neighbouring cells are taken on unit cells
I_-1 = [-1, 0], I_0 = [0, 1], I_1 = [1, 2]; the inline stencil uses
I_l = [0, 1], I_r = [1, 2] and the projected cell I_p = [alpha, 1 + alpha].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .adaptivity import block_ghosts, from_x_lines, x_lines
from .dg_core import NodalField, reference_basis

LIMITER_MODES = (
    "none",
    "minmod+simple",
    "minmod+line",
    "meanerr+simple",
    "meanerr+line",
    "sldg",
)


@dataclass(frozen=True)
class LimiterConfig:
    mode: str = "none"
    threshold: float = 0.5
    simple_weights: tuple[float, float, float] = (0.001, 0.998, 0.001)
    line_weights: tuple[float, float, float] = (0.45, 0.1, 0.45)
    eps: float = 1e-6

    def __post_init__(self):
        if self.mode not in LIMITER_MODES:
            raise ValueError(f"unknown limiter mode {self.mode!r}; choose from {LIMITER_MODES}")
        if not self.threshold > 0:
            raise ValueError("limiter threshold must be positive")
        if abs(sum(self.line_weights) - 1.0) > 1e-12:
            raise ValueError("line WENO weights must sum to one")
        if self.line_weights[1] == 0:
            raise ValueError("line WENO central weight must be non-zero")

    @property
    def indicator(self) -> str | None:
        return self.mode.split("+")[0] if "+" in self.mode else None

    @property
    def modifier(self) -> str | None:
        return self.mode.split("+")[1] if "+" in self.mode else None

    @property
    def inline(self) -> bool:
        return self.mode == "sldg"

    @property
    def post(self) -> bool:
        return "+" in self.mode


@dataclass
class SweepStats:
    """Troubled-cell counters filled by sweeps and limiter passes."""

    troubled: dict = field(default_factory=dict)
    outside_window: int = 0

    def add(self, key: str, n: int):
        self.troubled[key] = self.troubled.get(key, 0) + n


@lru_cache(maxsize=None)
def _tables(K: int):
    b = reference_basis(K - 1)
    return {
        "w": b.weights,
        "left": b.left_trace,
        "right": b.right_trace,
        # extensions of the neighbours into I_0, at the nodes of I_0
        "ext_from_left": b.at(b.nodes + 1.0),
        "ext_from_right": b.at(b.nodes - 1.0),
        # means of those extensions over I_0
        "mean_from_left": b.integrals(1.0, 2.0),
        "mean_from_right": b.integrals(-1.0, 0.0),
        "x": b.nodes,
    }


def minmod(a, b, c):
    a, b, c = np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)
    s = np.sign(a)
    same = (s == np.sign(b)) & (s == np.sign(c))
    return np.where(same, s * np.minimum(np.minimum(np.abs(a), np.abs(b)), np.abs(c)), 0.0)


def indicator_minmod(um, u0, up) -> np.ndarray:
    t = _tables(np.shape(u0)[-1])
    mm, m0, mp = um @ t["w"], u0 @ t["w"], up @ t["w"]
    u_plus = u0 @ t["right"] - m0
    u_minus = m0 - u0 @ t["left"]
    d_plus, d_minus = mp - m0, m0 - mm
    # comparisons at round-off level relative to the stencil magnitude
    scale = np.maximum(np.max(np.abs(u0), axis=-1), np.maximum(np.abs(mm), np.abs(mp)))
    tol = 1e-12 * scale
    return (np.abs(minmod(u_plus, d_plus, d_minus) - u_plus) > tol) | (
        np.abs(minmod(u_minus, d_plus, d_minus) - u_minus) > tol
    )


def meanerr_value(um, u0, up) -> np.ndarray:
    """The normalised mean-error indicator value (0 for an all-zero stencil)."""
    t = _tables(np.shape(u0)[-1])
    mm, m0, mp = um @ t["w"], u0 @ t["w"], up @ t["w"]
    num = np.abs(um @ t["mean_from_left"] - m0) + np.abs(up @ t["mean_from_right"] - m0)
    den = np.maximum(np.maximum(np.abs(mm), np.abs(m0)), np.abs(mp))
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def indicator_meanerr(um, u0, up, threshold: float = 0.5) -> np.ndarray:
    return meanerr_value(um, u0, up) > threshold


def smoothness_beta(u) -> np.ndarray:
    """Sum over s = 1..k of the integral of the squared s-th derivative on [0, 1]."""
    u = np.asarray(u, dtype=float)
    b = reference_basis(u.shape[-1] - 1)
    beta = np.zeros(u.shape[:-1])
    d = u
    for _ in range(b.k):
        d = d @ b.D.T
        beta = beta + (d * d) @ b.weights
    return beta


def _normalise(wbar):
    return [w / sum(wbar) for w in wbar]


def modify_simple_weno(um, u0, up, cfg: LimiterConfig = LimiterConfig()) -> np.ndarray:
    t = _tables(np.shape(u0)[-1])
    m0 = (u0 @ t["w"])[..., None]
    # neighbours extended into I_0 and shifted to the mean of u_0
    qm = um @ t["ext_from_left"].T - (um @ t["mean_from_left"])[..., None] + m0
    qp = up @ t["ext_from_right"].T - (up @ t["mean_from_right"])[..., None] + m0
    g = cfg.simple_weights
    # smoothness of each candidate on I_0; measured on the neighbour's own
    # cell a wild extrapolation can win the weights and the sweeps blow up
    wm, w0, wp = _normalise(
        [gl / (cfg.eps + smoothness_beta(q)) ** 2 for gl, q in zip(g, (qm, u0, qp))]
    )
    return wm[..., None] * qm + w0[..., None] * u0 + wp[..., None] * qp


def modify_line_weno(um, u0, up, cfg: LimiterConfig = LimiterConfig()) -> np.ndarray:
    t = _tables(np.shape(u0)[-1])
    mm, m0, mp = um @ t["w"], u0 @ t["w"], up @ t["w"]
    xc = t["x"] - 0.5
    s_m, s_p = m0 - mm, mp - m0
    pm = m0[..., None] + s_m[..., None] * xc
    pp = m0[..., None] + s_p[..., None] * xc
    gm, g0, gp = cfg.line_weights
    p0 = (u0 - gm * pm - gp * pp) / g0
    b_m, b_0, b_p = s_m**2, smoothness_beta(u0), s_p**2
    tau = (0.5 * (np.abs(b_0 - b_m) + np.abs(b_0 - b_p))) ** 2
    wm, w0, wp = _normalise(
        [g * (1.0 + tau / (cfg.eps + b)) for g, b in ((gm, b_m), (g0, b_0), (gp, b_p))]
    )
    return wm[..., None] * pm + w0[..., None] * p0 + wp[..., None] * pp


def indicate(um, u0, up, cfg: LimiterConfig) -> np.ndarray:
    if cfg.indicator == "minmod":
        return indicator_minmod(um, u0, up)
    return indicator_meanerr(um, u0, up, cfg.threshold)


def modify(um, u0, up, cfg: LimiterConfig) -> np.ndarray:
    if cfg.modifier == "simple":
        return modify_simple_weno(um, u0, up, cfg)
    return modify_line_weno(um, u0, up, cfg)


def post_limit_lines(u, left, right, cfg: LimiterConfig, periodic: bool = False):
    """Indicator/modifier pass along axis -2 of ``u`` (lines, cells, nodes).

    `left`/`right` hold one neighbour cell per line beyond each end (zeros at
    a wall); they are ignored for periodic lines.  Every cell is checked
    against the unmodified neighbours.  Returns the new array and the number
    of modified cells.
    """
    if periodic:
        um, up = np.roll(u, 1, axis=-2), np.roll(u, -1, axis=-2)
    else:
        um = np.concatenate([left, u[..., :-1, :]], axis=-2)
        up = np.concatenate([u[..., 1:, :], right], axis=-2)
    flag = indicate(um, u, up, cfg)
    n = int(np.count_nonzero(flag))
    if n == 0:
        return u, 0
    out = u.copy()
    out[flag] = modify(um[flag], u[flag], up[flag], cfg)
    return out, n


def apply_post_limiter(f: NodalField, direction: str, cfg: LimiterConfig,
                       periodic: bool = False, stats: SweepStats | None = None) -> NodalField:
    """Indicator/modifier pass along x or v after a sweep in that direction."""
    if not cfg.post:
        return f
    nx, K, nv, _ = f.values.shape
    if direction == "v":
        lines = f.values.reshape(nx * K, nv, K)
        zero = np.zeros((nx * K, 1, K))
        out, n = post_limit_lines(lines, zero, zero, cfg, periodic)
        if stats is not None:
            stats.add("post_v", n)
        return f.replace(out.reshape(nx, K, nv, K))
    if direction != "x":
        raise ValueError("direction must be 'x' or 'v'")
    lines = x_lines(f.values)
    out = np.empty_like(lines)
    total = 0
    for b, sl in enumerate(f.x.block_slices()):
        if len(f.x.blocks) == 1 and periodic:
            out[:, sl], n = post_limit_lines(lines[:, sl], None, None, cfg, periodic=True)
        else:
            left, right = block_ghosts(lines, f.x, b, 1, periodic)
            out[:, sl], n = post_limit_lines(lines[:, sl], left, right, cfg)
        total += n
    if stats is not None:
        stats.add("post_x", total)
    return f.replace(from_x_lines(out, nv))



# ---------------------------------------------------------------- inline limiter


def poly_extrema(u, a, b):
    """Minimum and maximum of nodal polynomials u over [a, b] (local coords).

    Exact for k <= 3 through the roots of the derivative; for larger k the
    polynomial is sampled at 33 Chebyshev points plus the end points.
    """
    u = np.asarray(u, dtype=float)
    basis = reference_basis(u.shape[-1] - 1)
    a = np.broadcast_to(np.asarray(a, float), u.shape[:-1])
    b = np.broadcast_to(np.asarray(b, float), u.shape[:-1])
    k = basis.k
    if k <= 3:
        c = u @ basis.to_monomial.T
        cands = [a, b]
        if k == 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                cands.append(-c[..., 1] / (2.0 * c[..., 2]))
        elif k == 3:
            A, B, C = 3.0 * c[..., 3], 2.0 * c[..., 2], c[..., 1]
            with np.errstate(divide="ignore", invalid="ignore"):
                disc = B * B - 4.0 * A * C
                sq = np.sqrt(np.maximum(disc, 0.0))
                q = -0.5 * (B + np.where(B >= 0, sq, -sq))
                r1 = np.where(A != 0, q / A, -C / B)
                r2 = np.where(q != 0, C / q, np.nan)
                r1 = np.where(disc < 0, np.nan, r1)
                r2 = np.where(disc < 0, np.nan, r2)
            cands += [r1, r2]
        x = np.stack(cands, axis=-1)
        inside = np.isfinite(x) & (x >= a[..., None]) & (x <= b[..., None])
        x = np.where(inside, x, a[..., None])
    else:
        c = u @ basis.to_monomial.T
        cheb = 0.5 * (1.0 - np.cos(np.pi * (np.arange(33) + 0.5) / 33))
        s = np.concatenate([[0.0, 1.0], cheb])
        x = a[..., None] + (b - a)[..., None] * s
    # Horner on the monomial coefficients
    vals = np.broadcast_to(c[..., k:k + 1], x.shape).copy()
    for j in range(k - 1, -1, -1):
        vals *= x
        vals += c[..., j:j + 1]
    return vals.min(axis=-1), vals.max(axis=-1)


def sldg_extension_means(up, alpha):
    """Means of the natural extension of u_p over I_l and I_r."""
    basis = reference_basis(np.shape(up)[-1] - 1)
    alpha = np.asarray(alpha, dtype=float)
    cl = basis.integrals(-alpha, 1.0 - alpha)
    cr = basis.integrals(1.0 - alpha, 2.0 - alpha)
    return np.einsum("...j,...j->...", up, cl), np.einsum("...j,...j->...", up, cr)


def sldg_indicator_value(ul, ur, up, alpha) -> np.ndarray:
    w = reference_basis(np.shape(up)[-1] - 1).weights
    ml, mr = ul @ w, ur @ w
    epl, epr = sldg_extension_means(up, alpha)
    num = np.abs(epl - ml) + np.abs(epr - mr)
    den = np.maximum(np.abs(ml), np.abs(mr))
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def sldg_indicator(ul, ur, up, alpha, threshold: float = 0.5) -> np.ndarray:
    return sldg_indicator_value(ul, ur, up, alpha) > threshold


def _ratio(num, den):
    ok = den != 0
    return np.where(ok, np.abs(np.divide(num, den, out=np.ones_like(num), where=ok)), 1.0)


def sldg_modifier(ul, ur, up, alpha):
    """Max-min clamp of the projected polynomial towards the input window.

    Returns the modified nodal values and a flag marking cells whose mean
    lies outside the window spanned by the inputs (the clamp then cannot
    restore the bounds).
    """
    ul, ur, up = (np.asarray(z, dtype=float) for z in (ul, ur, up))
    alpha = np.broadcast_to(np.asarray(alpha, float), up.shape[:-1])
    w = reference_basis(up.shape[-1] - 1).weights
    mean = up @ w
    pmin, pmax = poly_extrema(up, 0.0, 1.0)
    lmin, lmax = poly_extrema(ul, alpha, 1.0)
    rmin, rmax = poly_extrema(ur, 0.0, alpha)
    wmin, wmax = np.minimum(lmin, rmin), np.maximum(lmax, rmax)
    theta = np.minimum(np.minimum(_ratio(wmax - mean, pmax - mean), _ratio(wmin - mean, pmin - mean)), 1.0)
    out = theta[..., None] * (up - mean[..., None]) + mean[..., None]
    return out, (mean > wmax) | (mean < wmin)


def sldg_limit(ul, ur, up, alpha, threshold: float = 0.5):
    """Indicator plus modifier for a batch of inline stencils.

    Returns (limited values, number of troubled cells, number of troubled
    cells whose mean lies outside the input window).
    """
    flag = sldg_indicator(ul, ur, up, alpha, threshold)
    n = int(np.count_nonzero(flag))
    if n == 0:
        return up, 0, 0
    alpha = np.broadcast_to(np.asarray(alpha, float), up.shape[:-1])
    out = up.copy()
    out[flag], outside = sldg_modifier(ul[flag], ur[flag], up[flag], alpha[flag])
    return out, n, int(np.count_nonzero(outside))
