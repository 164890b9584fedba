"""Semi-Lagrangian discontinuous Galerkin Vlasov-Poisson solver for
scrape-off-layer plasma (one space and one velocity dimension)."""

from .advection import advect_v, advect_x, build_matrices, decompose_shift
from .config import PRESETS, ConfigError, RunConfig, resolve
from .dg_core import CellPolynomial, Grid1D, NodalField, reference_basis
from .limiters import LimiterConfig
from .simulation import build_initial_state, run
from .stepper import SimulationState, strang_step

__version__ = "0.1.0"

__all__ = [
    "CellPolynomial", "ConfigError", "Grid1D", "LimiterConfig", "NodalField", "PRESETS",
    "RunConfig", "SimulationState", "advect_v", "advect_x", "build_initial_state",
    "build_matrices", "decompose_shift", "reference_basis", "resolve", "run", "strang_step",
]
