"""Reference-cell nodal basis, quadrature and L2 projection utilities.

Every polynomial is stored by its values at the Gauss-Legendre nodes of the
reference cell [0, 1].  Physical cells are affine images of that cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_DEGREE = 6
# the potential is solved one degree above the field
_MAX_BASIS_DEGREE = MAX_DEGREE + 1


def _legendre(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_n(x) and its derivative by the three-term recurrence (n >= 1)."""
    p0, p1 = np.ones_like(x), x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p1, n * (x * p1 - p0) / (x * x - 1.0)


def gauss_legendre(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights with k+1 points on [0, 1].

    Newton iteration on the Legendre polynomial P_{k+1}; the rule is exact
    for polynomials of degree <= 2k+1 and the weights sum to one.
    """
    if k < 0:
        raise ValueError(f"degree must be non-negative, got {k}")
    n = k + 1
    x = np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return 0.5 * (x[order] + 1.0), 0.5 * w[order]


def lagrange_matrix(nodes: np.ndarray, x) -> np.ndarray:
    """Values of the Lagrange basis through `nodes` at points `x`.

    Returns an array of shape ``x.shape + (len(nodes),)``.  Points may lie
    outside the cell; the basis is then extended as a polynomial.
    """
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.ones(x.shape + (n,))
    for j in range(n):
        for m in range(n):
            if m != j:
                out[..., j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return out


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """D[i, j] = l_j'(nodes[i]); exact for the nodal interpolant."""
    n = len(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (bary[j] / bary[i]) / (nodes[i] - nodes[j])
        D[i, i] = -np.sum(D[i])
    return D


@dataclass(frozen=True, eq=False)
class ReferenceBasis:
    """Nodal Lagrange basis of degree k on [0, 1]."""

    k: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    left_trace: np.ndarray = field(repr=False)
    right_trace: np.ndarray = field(repr=False)
    to_monomial: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.k + 1

    def at(self, x) -> np.ndarray:
        return lagrange_matrix(self.nodes, x)

    def derivative_at(self, x) -> np.ndarray:
        return lagrange_matrix(self.nodes, x) @ self.D

    def integrals(self, a, b) -> np.ndarray:
        """Integrals of each basis function over [a, b] (broadcast over a, b)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        pts = a[..., None] + (b - a)[..., None] * self.nodes
        vals = lagrange_matrix(self.nodes, pts)
        return (b - a)[..., None] * np.einsum("q,...qj->...j", self.weights, vals)


@lru_cache(maxsize=None)
def reference_basis(k: int) -> ReferenceBasis:
    if not 0 <= k <= _MAX_BASIS_DEGREE:
        raise ValueError(f"degree k={k} outside supported range 0..{_MAX_BASIS_DEGREE}")
    nodes, weights = gauss_legendre(k)
    vander = np.vander(nodes, k + 1, increasing=True)
    return ReferenceBasis(
        k=k,
        nodes=nodes,
        weights=weights,
        D=differentiation_matrix(nodes),
        left_trace=lagrange_matrix(nodes, 0.0),
        right_trace=lagrange_matrix(nodes, 1.0),
        to_monomial=np.linalg.inv(vander),
    )


@dataclass
class CellPolynomial:
    """Degree-k polynomial on [left, left + width] stored at the k+1 nodes."""

    values: np.ndarray
    left: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def k(self) -> int:
        return len(self.values) - 1

    @property
    def basis(self) -> ReferenceBasis:
        return reference_basis(self.k)

    @property
    def right(self) -> float:
        return self.left + self.width

    def __call__(self, x):
        return evaluate(self, x)

    @classmethod
    def from_function(cls, func, k: int, left: float = 0.0, width: float = 1.0):
        b = reference_basis(k)
        return cls(func(left + width * b.nodes), left, width)


def evaluate(p: CellPolynomial, x):
    """Value of the cell interpolant at physical coordinate(s) x."""
    xi = (np.asarray(x, dtype=float) - p.left) / p.width
    return p.basis.at(xi) @ p.values


def cell_mean(p) -> float | np.ndarray:
    """Average over the cell (nodal arrays broadcast over leading axes)."""
    values = p.values if isinstance(p, CellPolynomial) else np.asarray(p)
    return values @ reference_basis(values.shape[-1] - 1).weights


def overlap_matrix(
    target: ReferenceBasis,
    source: ReferenceBasis,
    src_left: float,
    src_width: float,
    tgt_left: float = 0.0,
    tgt_width: float = 1.0,
) -> np.ndarray:
    """Contribution of one source cell to the L2 projection onto a target cell.

    Returns P with ``target_values += P @ source_values``; only the overlap of
    the two intervals contributes.
    """
    a = max(src_left, tgt_left)
    b = min(src_left + src_width, tgt_left + tgt_width)
    P = np.zeros((target.n, source.n))
    if b <= a:
        return P
    nq = (target.k + source.k) // 2 + 1
    qx, qw = gauss_legendre(nq - 1)
    x = a + (b - a) * qx
    lt = target.at((x - tgt_left) / tgt_width)
    ls = source.at((x - src_left) / src_width)
    P = (b - a) * np.einsum("q,qn,qm->nm", qw, lt, ls)
    return P / (tgt_width * target.weights[:, None])


def project_L2(
    source: Sequence[CellPolynomial], left: float, width: float, k: int
) -> CellPolynomial:
    """L2 projection of a piecewise polynomial onto the cell [left, left+width].

    The pieces of `source` must cover the target interval; the projection
    preserves the integral over the target cell.
    """
    tb = reference_basis(k)
    out = np.zeros(k + 1)
    for piece in source:
        P = overlap_matrix(tb, piece.basis, piece.left, piece.width, left, width)
        out += P @ piece.values
    return CellPolynomial(out, left, width)


@dataclass(frozen=True)
class Block:
    left: float
    n: int
    dx: float

    @property
    def right(self) -> float:
        return self.left + self.n * self.dx


@dataclass(frozen=True)
class Grid1D:
    """Contiguous blocks of uniform cells."""

    blocks: tuple[Block, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("grid needs at least one block")
        for b in self.blocks:
            if b.n < 1 or not b.dx > 0:
                raise ValueError(f"invalid block {b}")
        for b0, b1 in zip(self.blocks, self.blocks[1:]):
            if not np.isclose(b0.right, b1.left, rtol=0, atol=1e-12 * max(1.0, abs(b1.left))):
                raise ValueError("blocks must be contiguous")
            big, small = max(b0.dx, b1.dx), min(b0.dx, b1.dx)
            m = big / small
            if abs(m - round(m)) > 1e-9:
                raise ValueError("adjacent block widths must have an integer ratio")

    @classmethod
    def uniform(cls, left: float, right: float, n: int) -> "Grid1D":
        return cls((Block(left, n, (right - left) / n),))

    @property
    def left(self) -> float:
        return self.blocks[0].left

    @property
    def right(self) -> float:
        return self.blocks[-1].right

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def n_cells(self) -> int:
        return sum(b.n for b in self.blocks)

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.n))
            start += b.n
        return out

    @property
    def widths(self) -> np.ndarray:
        return np.concatenate([np.full(b.n, b.dx) for b in self.blocks])

    @property
    def lefts(self) -> np.ndarray:
        return np.concatenate([b.left + b.dx * np.arange(b.n) for b in self.blocks])

    @property
    def edges(self) -> np.ndarray:
        return np.append(self.lefts, self.right)

    def nodes(self, k: int) -> np.ndarray:
        """Physical node coordinates, shape (n_cells, k+1)."""
        xi = reference_basis(k).nodes
        return self.lefts[:, None] + self.widths[:, None] * xi[None, :]

    def locate(self, x: float) -> tuple[int, float]:
        """Cell index containing x and the local coordinate in [0, 1]."""
        lefts, widths = self.lefts, self.widths
        i = int(np.clip(np.searchsorted(lefts, x, side="right") - 1, 0, self.n_cells - 1))
        return i, (x - lefts[i]) / widths[i]


@dataclass
class NodalField:
    """Phase-space density of one species.

    ``values[i, a, j, b]`` is f at x-node a of x-cell i and v-node b of
    v-cell j.
    """

    species: str
    x: Grid1D
    v: Grid1D
    values: np.ndarray
    k: int = 3

    def __post_init__(self):
        if not 0 <= self.k <= MAX_DEGREE:
            raise ValueError(f"field degree k={self.k} outside supported range 0..{MAX_DEGREE}")
        K = self.k + 1
        shape = (self.x.n_cells, K, self.v.n_cells, K)
        if self.values.shape != shape:
            raise ValueError(f"value tensor has shape {self.values.shape}, expected {shape}")

    @classmethod
    def zeros(cls, species: str, x: Grid1D, v: Grid1D, k: int = 3) -> "NodalField":
        K = k + 1
        return cls(species, x, v, np.zeros((x.n_cells, K, v.n_cells, K)), k)

    @classmethod
    def from_function(cls, species, x: Grid1D, v: Grid1D, func, k: int = 3) -> "NodalField":
        xn = x.nodes(k)[:, :, None, None]
        vn = v.nodes(k)[None, None, :, :]
        vals = np.broadcast_to(func(xn, vn), (x.n_cells, k + 1, v.n_cells, k + 1))
        return cls(species, x, v, np.array(vals, dtype=float), k)

    @property
    def vmax(self) -> float:
        return self.v.right

    def replace(self, values: np.ndarray, v: Grid1D | None = None) -> "NodalField":
        return NodalField(self.species, self.x, self.v if v is None else v, values, self.k)

    def mass(self) -> float:
        w = reference_basis(self.k).weights
        return float(
            np.einsum("iajb,a,b,i,j->", self.values, w, w, self.x.widths, self.v.widths)
        )
