"""SIPG discretisation of -phi'' = rho on a (possibly multi-block) x grid.

The potential uses degree k+1 per cell while the charge density and the
field use degree k; differentiating the higher-degree potential keeps the
field at order k+1.  Homogeneous Dirichlet conditions hold at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .dg_core import Grid1D, NodalField, reference_basis


class PoissonError(RuntimeError):
    pass


@dataclass(eq=False)
class PoissonOperator:
    grid: Grid1D
    k: int
    penalty_scale: float
    matrix: np.ndarray = field(repr=False)
    _chol: np.ndarray = field(repr=False)

    @property
    def solve_degree(self) -> int:
        return self.k + 1

    @property
    def bandwidth(self) -> int:
        return 2 * (self.k + 2) - 1


@dataclass(frozen=True, eq=False)
class FieldPair:
    """phi (degree k+1, nodal at k+2 points) and E = -phi' (degree k)."""

    grid: Grid1D
    k: int
    phi: np.ndarray
    E: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid1D, k: int) -> "FieldPair":
        return cls(grid, k, np.zeros((grid.n_cells, k + 2)), np.zeros((grid.n_cells, k + 1)))

    def phi_at(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        b = reference_basis(self.k + 1)
        out = np.empty_like(x)
        for n, xv in enumerate(x):
            i, xi = self.grid.locate(xv)
            out[n] = b.at(xi) @ self.phi[i]
        return out

    def E_at(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        b = reference_basis(self.k)
        out = np.empty_like(x)
        for n, xv in enumerate(x):
            i, xi = self.grid.locate(xv)
            out[n] = b.at(xi) @ self.E[i]
        return out


def assemble_matrix(grid: Grid1D, k: int, penalty_scale: float = 10.0) -> np.ndarray:
    """Dense SIPG stiffness matrix for degree k+1 broken polynomials."""
    b = reference_basis(k + 1)
    K = b.n
    n = grid.n_cells
    h = grid.widths
    S = np.zeros((n * K, n * K))
    stiff = b.D.T @ np.diag(b.weights) @ b.D
    l0, l1 = b.left_trace, b.right_trace
    d0, d1 = b.derivative_at(0.0), b.derivative_at(1.0)
    pen = penalty_scale * (k + 2) ** 2
    for i in range(n):
        s = slice(i * K, (i + 1) * K)
        S[s, s] += stiff / h[i]
    # faces: index f sits between cell f-1 and cell f; faces 0 and n are walls
    for f in range(n + 1):
        if f == 0 or f == n:
            i = 0 if f == 0 else n - 1
            tr = l0 if f == 0 else l1
            # outward normal derivative
            dn = (-d0 if f == 0 else d1) / h[i]
            sigma = pen / h[i]
            s = slice(i * K, (i + 1) * K)
            S[s, s] += -np.outer(tr, dn) - np.outer(dn, tr) + sigma * np.outer(tr, tr)
            continue
        iL, iR = f - 1, f
        sigma = pen / min(h[iL], h[iR])
        # jump [v] = v_L(1) - v_R(0), average {v'}
        jump = [(iL, l1), (iR, -l0)]
        avg = [(iL, 0.5 * d1 / h[iL]), (iR, 0.5 * d0 / h[iR])]
        for (a, ja), (c, jc) in ((x, y) for x in jump for y in jump):
            S[a * K:(a + 1) * K, c * K:(c + 1) * K] += sigma * np.outer(ja, jc)
        for (a, ja), (c, dc) in ((x, y) for x in jump for y in avg):
            blk = np.outer(ja, dc)
            S[a * K:(a + 1) * K, c * K:(c + 1) * K] -= blk
            S[c * K:(c + 1) * K, a * K:(a + 1) * K] -= blk.T
    return S


def _to_banded(S: np.ndarray, u: int) -> np.ndarray:
    n = S.shape[0]
    ab = np.zeros((u + 1, n))
    for d in range(u + 1):
        ab[u - d, d:] = np.diagonal(S, d)
    return ab


def assemble(grid: Grid1D, k: int = 3, penalty_scale: float = 10.0) -> PoissonOperator:
    """Assemble and factorise once; raises PoissonError if not positive definite."""
    if not penalty_scale > 0:
        raise ValueError("penalty scale must be positive")
    S = assemble_matrix(grid, k, penalty_scale)
    u = 2 * (k + 2) - 1
    try:
        chol = cholesky_banded(_to_banded(S, u), lower=False)
    except LinAlgError as exc:
        raise PoissonError(
            f"SIPG matrix not positive definite (penalty_scale={penalty_scale} too small?)"
        ) from exc
    return PoissonOperator(grid, k, penalty_scale, S, chol)


def charge_density(f_e: NodalField, f_i: NodalField) -> np.ndarray:
    """rho = int f_i dv - int f_e dv at the x nodes, shape (Nx, k+1)."""
    return density(f_i) - density(f_e)


def density(f: NodalField) -> np.ndarray:
    w = reference_basis(f.k).weights
    return np.einsum("iajb,b,j->ia", f.values, w, f.v.widths)


def load_vector(op: PoissonOperator, rho: np.ndarray) -> np.ndarray:
    bk = reference_basis(op.k)
    b2 = reference_basis(op.k + 1)
    # rho re-evaluated on the degree k+1 nodes
    rho2 = rho @ bk.at(b2.nodes).T
    return (op.grid.widths[:, None] * b2.weights[None, :] * rho2).ravel()


def solve(op: PoissonOperator, rho: np.ndarray) -> FieldPair:
    rho = np.asarray(rho, dtype=float)
    n = op.grid.n_cells
    if rho.shape != (n, op.k + 1):
        raise ValueError(f"rho has shape {rho.shape}, expected {(n, op.k + 1)}")
    rhs = load_vector(op, rho)
    phi = cho_solve_banded((op._chol, False), rhs).reshape(n, op.k + 2)
    b2 = reference_basis(op.k + 1)
    Dk = b2.derivative_at(reference_basis(op.k).nodes)
    E = -(phi @ Dk.T) / op.grid.widths[:, None]
    return FieldPair(op.grid, op.k, phi, E)


def residual(op: PoissonOperator, rho: np.ndarray, fields: FieldPair) -> float:
    rhs = load_vector(op, rho)
    r = op.matrix @ fields.phi.ravel() - rhs
    return float(np.linalg.norm(r) / max(np.linalg.norm(rhs), 1e-300))
