"""Velocity-domain shrinking and the fine/coarse/fine block layout in x."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .dg_core import Block, CellPolynomial, Grid1D, NodalField, overlap_matrix, reference_basis


class GhostWidthError(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(
            f"ghost width {available} too small for the pending sweep; {required} cells required"
        )
        self.required = required
        self.available = available


@dataclass(frozen=True)
class VAdjustPolicy:
    p: float = 0.05
    gamma: float = 0.05
    tol: float = 1e-14
    min_interval: int = 10

    def __post_init__(self):
        if not (self.p > 0 and self.gamma >= 0 and self.p + self.gamma < 1 and self.tol > 0):
            raise ValueError(f"invalid velocity adjustment policy {self}")


@dataclass(frozen=True)
class BlockLayout:
    """Three x blocks: fine, coarse, fine, with dx_coarse = m * dx_fine."""

    L: float
    fine_cells: int
    coarse_cells: int
    m: int = 1
    ghost_width: int | None = None

    def __post_init__(self):
        if self.m < 1 or self.fine_cells < 1 or self.coarse_cells < 1:
            raise ValueError(f"invalid block layout {self}")

    def grid(self) -> Grid1D:
        dxf = 2.0 * self.L / (2 * self.fine_cells + self.m * self.coarse_cells)
        left = -self.L
        mid = left + self.fine_cells * dxf
        right = mid + self.coarse_cells * self.m * dxf
        return Grid1D(
            (
                Block(left, self.fine_cells, dxf),
                Block(mid, self.coarse_cells, self.m * dxf),
                Block(right, self.fine_cells, dxf),
            )
        )


# ------------------------------------------------------------------ transfers


@lru_cache(maxsize=None)
def _restriction(K: int, m: int) -> np.ndarray:
    b = reference_basis(K - 1)
    return np.stack([overlap_matrix(b, b, q / m, 1.0 / m) for q in range(m)])


@lru_cache(maxsize=None)
def _prolongation(K: int, m: int) -> np.ndarray:
    b = reference_basis(K - 1)
    return np.stack([b.at((q + b.nodes) / m) for q in range(m)])


def restrict(values: np.ndarray, m: int) -> np.ndarray:
    """Project groups of m fine cells (axis -2) onto coarse cells."""
    if m == 1:
        return values.copy()
    n, K = values.shape[-2:]
    if n % m:
        raise ValueError(f"{n} fine cells do not tile coarse cells of ratio {m}")
    grouped = values.reshape(values.shape[:-2] + (n // m, m, K))
    return np.einsum("qnj,...cqj->...cn", _restriction(K, m), grouped)


def prolong(values: np.ndarray, m: int) -> np.ndarray:
    """Evaluate coarse cells (axis -2) on their m fine sub-cells."""
    if m == 1:
        return values.copy()
    n, K = values.shape[-2:]
    fine = np.einsum("qnj,...cj->...cqn", _prolongation(K, m), values)
    return fine.reshape(values.shape[:-2] + (n * m, K))


def fine_to_coarse(cells: Sequence[CellPolynomial]) -> CellPolynomial:
    m = len(cells)
    dx = cells[0].width
    for q, c in enumerate(cells):
        if abs(c.width - dx) > 1e-12 * dx or abs(c.left - (cells[0].left + q * dx)) > 1e-12 * max(1.0, dx):
            raise ValueError("fine cells do not tile a coarse cell")
    vals = restrict(np.stack([c.values for c in cells]), m)[0]
    return CellPolynomial(vals, cells[0].left, m * dx)


def coarse_to_fine(cell: CellPolynomial, m: int) -> list[CellPolynomial]:
    if m < 1:
        raise ValueError("refinement ratio must be >= 1")
    vals = prolong(cell.values[None, :], m)
    dx = cell.width / m
    return [CellPolynomial(vals[q], cell.left + q * dx, dx) for q in range(m)]


# --------------------------------------------------------------------- ghosts


def required_ghost_width(max_speed: float, tau: float, dx: float) -> int:
    # round-off above a whole number of cells should not cost a ghost cell
    reach = abs(max_speed) * abs(tau) / dx
    return math.ceil(reach - 1e-12 * max(1.0, reach)) + 1


def _neighbour_cells(lines, grid: Grid1D, nb: int, side: str, count: int, dx: float):
    """`count` cells of width dx taken from block `nb` at its `side` end."""
    blk = grid.blocks[nb]
    sl = grid.block_slices()[nb]
    r = blk.dx / dx
    m = int(round(r if r >= 1 else 1.0 / r))
    if r >= 1:  # neighbour is coarser (or equal): evaluate
        nc = -(-count // m)
        if nc > blk.n:
            raise GhostWidthError(count, blk.n * m)
        src = lines[:, sl][:, -nc:] if side == "end" else lines[:, sl][:, :nc]
        fine = prolong(src, m)
        return fine[:, -count:] if side == "end" else fine[:, :count]
    nf = count * m
    if nf > blk.n:
        raise GhostWidthError(count, blk.n // m)
    src = lines[:, sl][:, -nf:] if side == "end" else lines[:, sl][:, :nf]
    return restrict(src, m)


def block_ghosts(lines: np.ndarray, grid: Grid1D, b: int, width: int, periodic: bool = False):
    """Ghost cells on both sides of block b, in block b's cell width.

    `lines` has layout (lines, all x cells, nodes).  Wall sides get zeros.
    """
    nb = len(grid.blocks)
    dx = grid.blocks[b].dx
    shape = (lines.shape[0], width, lines.shape[2])
    if b > 0 or periodic:
        left = _neighbour_cells(lines, grid, (b - 1) % nb, "end", width, dx)
    else:
        left = np.zeros(shape)
    if b < nb - 1 or periodic:
        right = _neighbour_cells(lines, grid, (b + 1) % nb, "start", width, dx)
    else:
        right = np.zeros(shape)
    return left, right


def exchange_block_boundaries(f: NodalField, tau: float, sqrt_mu: float = 1.0,
                              ghost_width: int | None = None, periodic: bool = False):
    """Ghost cells for every block ahead of an x sweep of length tau.

    Returns one (left, right) pair per block, each of shape
    (lines, width, k+1).  A fixed `ghost_width` smaller than the upwind reach
    raises GhostWidthError.
    """
    lines = x_lines(f.values)
    vmax = max(abs(f.v.left), abs(f.v.right)) / sqrt_mu
    out = []
    for b, blk in enumerate(f.x.blocks):
        need = required_ghost_width(vmax, tau, blk.dx)
        width = need if ghost_width is None else ghost_width
        if width < need:
            raise GhostWidthError(need, width)
        out.append(block_ghosts(lines, f.x, b, width, periodic))
    return out


def x_lines(values: np.ndarray) -> np.ndarray:
    """(Nx, K, Nv, K) -> (Nv*K, Nx, K): one line per v node."""
    nx, K, nv, _ = values.shape
    return values.transpose(2, 3, 0, 1).reshape(nv * K, nx, K)


def from_x_lines(lines: np.ndarray, nv: int) -> np.ndarray:
    L, nx, K = lines.shape
    return np.ascontiguousarray(lines.reshape(nv, K, nx, K).transpose(2, 3, 0, 1))


# ------------------------------------------------------------ velocity domain


def probe_velocity(f: NodalField, policy: VAdjustPolicy) -> float:
    return f.vmax * (1.0 - policy.p - policy.gamma)


def _stripe(f: NodalField, v: float) -> np.ndarray:
    j, xi = f.v.locate(v)
    return f.values[:, :, j, :] @ reference_basis(f.k).at(xi)


def check_velocity_shrink(f: NodalField, policy: VAdjustPolicy = VAdjustPolicy()) -> bool:
    """True when |f| < tol on both probe stripes v = +-vmax (1 - p - gamma)."""
    vp = probe_velocity(f, policy)
    return bool(
        np.max(np.abs(_stripe(f, vp))) < policy.tol and np.max(np.abs(_stripe(f, -vp))) < policy.tol
    )


def shrink_projection(old: Grid1D, new: Grid1D, k: int) -> np.ndarray:
    """Dense L2 projection tensor P[j, b, q, c] from old to new v cells."""
    b = reference_basis(k)
    K = k + 1
    P = np.zeros((new.n_cells, K, old.n_cells, K))
    olefts, owidths = old.lefts, old.widths
    for j, (a, w) in enumerate(zip(new.lefts, new.widths)):
        q0 = max(int(np.searchsorted(olefts, a, side="right")) - 1, 0)
        for q in range(q0, old.n_cells):
            if olefts[q] >= a + w:
                break
            P[j, :, q, :] = overlap_matrix(b, b, olefts[q], owidths[q], a, w)
    return P


def shrink_velocity_domain(f: NodalField, policy: VAdjustPolicy = VAdjustPolicy()) -> NodalField:
    """Project f onto [-vmax (1-p), vmax (1-p)] keeping the v cell count."""
    vnew = f.vmax * (1.0 - policy.p)
    grid = Grid1D.uniform(-vnew, vnew, f.v.n_cells)
    P = shrink_projection(f.v, grid, f.k)
    vals = np.einsum("jbqc,iaqc->iajb", P, f.values, optimize=True)
    return f.replace(vals, grid)


@dataclass
class ShrinkEvent:
    step: int
    species: str
    vmax_old: float
    vmax_new: float
    mass_old: float
    mass_new: float


def adapt_velocity(fields: dict, step: int, last: dict, policy: VAdjustPolicy = VAdjustPolicy()):
    """Shrink each species' v domain when allowed; mutates `fields` and `last`.

    `last` maps species name to the step of its previous shrink; at most one
    shrink per `policy.min_interval` steps is accepted.
    """
    events = []
    for name, f in fields.items():
        prev = last.get(name)
        if prev is not None and step - prev < policy.min_interval:
            continue
        if check_velocity_shrink(f, policy):
            g = shrink_velocity_domain(f, policy)
            events.append(ShrinkEvent(step, name, f.vmax, g.vmax, f.mass(), g.mass()))
            fields[name] = g
            last[name] = step
    return events
