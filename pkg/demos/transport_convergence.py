"""Free streaming of a Gaussian on a periodic line.

The sLdG update is exact for polynomials of degree k, so for smooth data
the only error is the cell-wise projection and the L2 error falls like
h^(k+1).  The run below keeps the CFL number fixed (1.25 cells per step)
so the fractional shift, and with it the error constant, is the same on
every grid.

    python demos/transport_convergence.py
"""

import math

import numpy as np

from solkin.advection import advect_line, build_matrices, decompose_shift
from solkin.dg_core import Grid1D, reference_basis


def transport_error(n: int, k: int, cfl: float = 1.25) -> float:
    g = Grid1D.uniform(-1.0, 1.0, n)
    x = g.nodes(k)
    u0 = np.exp(-((x / 0.25) ** 2))
    steps = int(round(n / cfl))
    shift = decompose_shift(1.0, 2.0 / steps, g.blocks[0].dx)
    M = build_matrices(k, shift.alpha)
    u = u0
    for _ in range(steps):  # one full period
        u = advect_line(u, shift, M, periodic=True)
    w = reference_basis(k).weights
    return math.sqrt(float(np.sum(g.blocks[0].dx * ((u - u0) ** 2) @ w)))


if __name__ == "__main__":
    for k in (1, 2, 3):
        errs = [transport_error(n, k) for n in (20, 40, 80, 160)]
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        print(f"k={k}: errors " + " ".join(f"{e:.2e}" for e in errs)
              + f"  orders {np.round(orders, 2).tolist()}")
