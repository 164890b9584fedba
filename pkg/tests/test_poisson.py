import math

import numpy as np
import pytest

from solkin import poisson
from solkin.adaptivity import BlockLayout
from solkin.dg_core import Grid1D, NodalField, reference_basis

GX, GW = np.polynomial.legendre.leggauss(12)
QX, QW = 0.5 * (GX + 1), 0.5 * GW


def l2_error(grid, values, k, exact):
    """L2 norm of a broken nodal polynomial minus exact(x), 12-point Gauss."""
    b = reference_basis(k)
    xq = grid.lefts[:, None] + grid.widths[:, None] * QX
    num = values @ b.at(QX).T
    return math.sqrt(np.sum(grid.widths[:, None] * QW * (num - exact(xq)) ** 2))


def test_single_cell_k0_structure():
    op = poisson.assemble(Grid1D.uniform(0, 1, 1), 0)
    assert op.matrix.shape == (2, 2)
    np.testing.assert_allclose(op.matrix, op.matrix.T, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 3, 6])
def test_matrix_symmetric_and_block_tridiagonal(k):
    grid = BlockLayout(5.0, 4, 3, 2).grid()
    S = poisson.assemble(grid, k).matrix
    assert np.max(np.abs(S - S.T)) <= 1e-12 * np.max(np.abs(S))
    K = k + 2
    n = grid.n_cells
    for i in range(n):
        for j in range(n):
            if abs(i - j) > 1:
                assert not np.any(S[i * K:(i + 1) * K, j * K:(j + 1) * K])


def test_zero_charge():
    op = poisson.assemble(Grid1D.uniform(-1, 1, 8), 3)
    fp = poisson.solve(op, np.zeros((8, 4)))
    assert not np.any(fp.phi) and not np.any(fp.E)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_constant_charge_gives_parabola(k):
    grid = Grid1D.uniform(-1, 1, 10)
    fp = poisson.solve(poisson.assemble(grid, k), np.full((10, k + 1), 2.0))
    xs = np.linspace(-1, 1, 37)
    np.testing.assert_allclose(fp.phi_at(xs), 1 - xs**2, atol=1e-10)
    np.testing.assert_allclose(fp.E_at(xs), 2 * xs, atol=1e-10)
    np.testing.assert_allclose(fp.E, 2 * grid.nodes(k), atol=1e-10)


def test_field_is_minus_derivative_of_potential():
    grid = Grid1D.uniform(-2, 2, 7)
    rng = np.random.default_rng(3)
    fp = poisson.solve(poisson.assemble(grid, 3), rng.normal(size=(7, 4)))
    b2 = reference_basis(4)
    x = reference_basis(3).nodes
    dphi = fp.phi @ b2.derivative_at(x).T / grid.widths[:, None]
    np.testing.assert_allclose(fp.E, -dphi, atol=1e-12)


def test_residual_and_factorisation_reuse(rng):
    grid = BlockLayout(10.0, 6, 5, 4).grid()
    op = poisson.assemble(grid, 3)
    chol = op._chol.copy()
    for _ in range(2):
        rho = rng.normal(size=(grid.n_cells, 4))
        fp = poisson.solve(op, rho)
        assert poisson.residual(op, rho, fp) < 1e-10
    np.testing.assert_array_equal(op._chol, chol)


def test_bad_shape_and_penalty():
    op = poisson.assemble(Grid1D.uniform(0, 1, 4), 2)
    with pytest.raises(ValueError):
        poisson.solve(op, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        poisson.assemble(Grid1D.uniform(0, 1, 4), 2, penalty_scale=0.0)


def test_tiny_penalty_is_not_positive_definite():
    with pytest.raises(poisson.PoissonError):
        poisson.assemble(Grid1D.uniform(0, 1, 8), 3, penalty_scale=1e-3)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_manufactured_solution_orders(k):
    L = 3.0
    c = math.pi / (2 * L)
    phi = lambda x: np.sin(c * (x + L))  # noqa: E731
    E = lambda x: -c * np.cos(c * (x + L))  # noqa: E731
    ep, ee, trace = [], [], []
    for n in (4, 8, 16, 32):
        grid = Grid1D.uniform(-L, L, n)
        rho = c * c * phi(grid.nodes(k))
        fp = poisson.solve(poisson.assemble(grid, k), rho)
        ep.append(l2_error(grid, fp.phi, k + 1, phi))
        ee.append(l2_error(grid, fp.E, k, E))
        trace.append(abs(fp.phi_at([-L])[0]) + abs(fp.phi_at([L - 1e-14])[0]))
    op_phi = np.log2(np.array(ep[:-1]) / ep[1:])
    op_E = np.log2(np.array(ee[:-1]) / ee[1:])
    assert np.all(op_phi >= k + 1.7), op_phi
    assert np.all(op_E >= k + 0.7), op_E
    # Dirichlet traces shrink like h^(k+2)
    h = 2 * L / np.array([4, 8, 16, 32])
    assert np.all(np.array(trace) <= 10 * h ** (k + 2))


def test_multi_block_grid_solution():
    grid = BlockLayout(2.0, 5, 3, 4).grid()
    fp = poisson.solve(poisson.assemble(grid, 3), np.full((grid.n_cells, 4), 2.0))
    xs = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(fp.phi_at(xs), 4 - xs**2, atol=1e-10)


def _fields(fe, fi):
    x = Grid1D.uniform(-1, 1, 6)
    v = Grid1D.uniform(-3, 3, 8)
    return (NodalField.from_function("e", x, v, fe, 3), NodalField.from_function("i", x, v, fi, 3))


def test_charge_density_examples():
    g = lambda X, V: np.exp(-X * X) * np.exp(-V * V)  # noqa: E731
    fe, fi = _fields(g, g)
    assert not np.any(poisson.charge_density(fe, fi))
    fe, fi = _fields(lambda X, V: 0 * X * V, lambda X, V: 1 / 6 + 0 * X * V)
    np.testing.assert_allclose(poisson.charge_density(fe, fi), 1.0, atol=1e-13)
    # separable f = g(x) h(v) with h a cubic: exact by Gauss quadrature
    h = lambda V: 1 + V - 0.2 * V**3  # noqa: E731
    fe, fi = _fields(lambda X, V: 0 * X * V, lambda X, V: np.cos(X) * h(V))
    int_h = 6.0  # odd terms vanish on [-3, 3]
    np.testing.assert_allclose(poisson.charge_density(fe, fi), int_h * np.cos(fe.x.nodes(3)),
                               atol=1e-12)
