"""Quick built-in invariant suite behind `solkin check`."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import advection, limiters, poisson
from .adaptivity import VAdjustPolicy, prolong, restrict, shrink_velocity_domain
from .dg_core import Grid1D, NodalField, gauss_legendre, reference_basis


def _quadrature():
    err = 0.0
    for k in range(7):
        x, w = gauss_legendre(k)
        for p in range(2 * k + 2):
            err = max(err, abs(np.sum(w * x**p) - 1.0 / (p + 1)))
    return err < 1e-14, f"max monomial error {err:.2e}"


def _shift_matrices():
    err = 0.0
    for k in range(7):
        for a in np.linspace(0.0, 0.95, 20):
            A, B = advection.build_matrices(k, a)
            err = max(err, np.max(np.abs((A + B).sum(axis=1) - 1.0)))
        A, B = advection.build_matrices(k, 0.0)
        err = max(err, np.max(np.abs(A - np.eye(k + 1))), np.max(np.abs(B)))
    return err < 1e-13, f"row-sum / identity error {err:.2e}"


def _advection_conservation():
    rng = np.random.default_rng(1)
    u = rng.normal(size=(8, 30, 4))
    istar, alpha = advection.decompose_shifts(rng.uniform(-5, 5, 8), 1.0, 0.7)
    out = advection.sweep_lines(u, istar, advection.build_matrices(3, alpha), alpha, periodic=True)
    w = reference_basis(3).weights
    err = np.max(np.abs((out @ w).sum(axis=1) - (u @ w).sum(axis=1)))
    return err < 1e-12, f"periodic mass drift {err:.2e}"


def _poisson_quadratic():
    grid = Grid1D.uniform(-1.0, 1.0, 16)
    op = poisson.assemble(grid, 3)
    fp = poisson.solve(op, np.full((16, 4), 2.0))
    x = grid.nodes(3)
    err = max(np.max(np.abs(fp.E - 2.0 * x)), np.max(np.abs(fp.phi_at([0.3]) - 0.91)))
    return err < 1e-10, f"rho = 2 error {err:.2e}"


def _limiter_means():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(20, 25, 4))
    u[:, 12] *= 30
    w = reference_basis(3).weights
    zero = np.zeros((20, 1, 4))
    worst = 0.0
    for mode in limiters.LIMITER_MODES:
        cfg = limiters.LimiterConfig(mode)
        if not cfg.post:
            continue
        out, _ = limiters.post_limit_lines(u, zero, zero, cfg)
        worst = max(worst, np.max(np.abs(out @ w - u @ w)))
    return worst < 1e-12, f"max cell-mean change {worst:.2e}"


def _inline_clamp():
    rng = np.random.default_rng(3)
    n = 2000
    ul, ur = rng.normal(size=(n, 4)), rng.normal(size=(n, 4))
    alpha = rng.uniform(0.0, 1.0, n)
    A, B = advection.build_matrices(3, alpha)
    up = np.einsum("nij,nj->ni", A, ul) + np.einsum("nij,nj->ni", B, ur)
    out, outside = limiters.sldg_modifier(ul, ur, up, alpha)
    lo, hi = limiters.poly_extrema(out, 0.0, 1.0)
    lmin, lmax = limiters.poly_extrema(ul, alpha, 1.0)
    rmin, rmax = limiters.poly_extrema(ur, 0.0, alpha)
    ok = ~outside
    bad = np.count_nonzero(ok & ((hi > np.maximum(lmax, rmax) + 1e-12)
                                 | (lo < np.minimum(lmin, rmin) - 1e-12)))
    return bad == 0, f"{bad} of {np.count_nonzero(ok)} in-window stencils escaped"


def _transfer_roundtrip():
    rng = np.random.default_rng(4)
    u = rng.normal(size=(5, 6, 4))
    err = max(np.max(np.abs(restrict(prolong(u, m), m) - u)) for m in (1, 2, 4, 8))
    return err < 1e-12, f"restrict(prolong(u)) error {err:.2e}"


def _shrink_mass():
    x = Grid1D.uniform(-1.0, 1.0, 6)
    v = Grid1D.uniform(-10.0, 10.0, 20)
    f = NodalField.from_function("e", x, v, lambda X, V: (1 - X * X) * np.exp(-V * V / 2), 3)
    g = shrink_velocity_domain(f, VAdjustPolicy())
    rel = abs(g.mass() - f.mass()) / f.mass()
    return rel < 1e-12 and math.isclose(g.vmax, 9.5), f"relative mass change {rel:.2e}"


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("gauss-legendre exactness", _quadrature),
    ("shift matrix consistency", _shift_matrices),
    ("periodic sweep conservation", _advection_conservation),
    ("poisson quadratic solution", _poisson_quadratic),
    ("post limiter mean preservation", _limiter_means),
    ("inline clamp window", _inline_clamp),
    ("block transfer round trip", _transfer_roundtrip),
    ("velocity shrink mass", _shrink_mass),
]


def run_checks(echo=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
