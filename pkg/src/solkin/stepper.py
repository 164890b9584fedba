"""Strang-split time step for the electron/ion system."""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import numpy as np

from . import poisson
from .advection import advect_v, advect_x
from .dg_core import NodalField
from .limiters import LimiterConfig, SweepStats, apply_post_limiter


class SimulationError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class SpeciesParams:
    name: str
    charge: float
    sqrt_mu: float = 1.0

    def __post_init__(self):
        if self.charge not in (-1.0, 1.0) or not self.sqrt_mu > 0:
            raise ValueError(f"invalid species parameters {self}")


def electrons() -> SpeciesParams:
    return SpeciesParams("e", -1.0, 1.0)


def ions(mu: float) -> SpeciesParams:
    return SpeciesParams("i", 1.0, math.sqrt(mu))


@dataclass(frozen=True)
class SourceTerm:
    """Neutral source S(t, x, v) shared by both species."""

    func: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    t0: float = math.inf

    def __call__(self, t, x, v):
        return self.func(t, x, v)


def injection_source(sigma: float, t0: float) -> SourceTerm:
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * t0)

    def S(t, x, v):
        on = 1.0 if t <= t0 else 0.0
        return on * norm * np.exp(-x * x / (2 * sigma * sigma)) * np.exp(-0.5 * v * v)

    return SourceTerm(S, t0)


def source_half_step(f: NodalField, t: float, h: float, S: SourceTerm | None) -> NodalField:
    """Heun step of length h for df/dt = S(t, x, v)."""
    if S is None or h == 0:
        return f
    x = f.x.nodes(f.k)[:, :, None, None]
    v = f.v.nodes(f.k)[None, None, :, :]
    inc = 0.5 * h * (S(t, x, v) + S(t + h, x, v))
    return f.replace(f.values + inc)


@dataclass
class SimulationState:
    fields: dict
    species: dict
    op: poisson.PoissonOperator
    E: poisson.FieldPair
    t: float = 0.0
    step: int = 0
    periodic: bool = False
    source: SourceTerm | None = None
    ghost_width: int | None = None
    stats: SweepStats = field(default_factory=SweepStats)
    timings: dict = field(default_factory=dict)

    @property
    def f_e(self) -> NodalField:
        return self.fields["e"]

    @property
    def f_i(self) -> NodalField:
        return self.fields["i"]

    def solve_field(self) -> poisson.FieldPair:
        rho = sum(sp.charge * poisson.density(self.fields[n]) for n, sp in self.species.items())
        return poisson.solve(self.op, rho)


def _check_finite(state: SimulationState, step: int):
    for name, f in state.fields.items():
        if not np.all(np.isfinite(f.values)):
            raise SimulationError(f"non-finite values in species {name!r}", step)


@contextmanager
def _timed(timings: dict, phase: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[phase] = timings.get(phase, 0.0) + time.perf_counter() - t0


def strang_step(state: SimulationState, dt: float, limiter: LimiterConfig = LimiterConfig(),
                frozen_field: poisson.FieldPair | None = None) -> SimulationState:
    """One Strang step: source, x/2, Poisson, v, x/2, source.

    With `frozen_field` the Poisson solve is skipped and that field is used.
    Returns a new state; the input state's fields are not modified.
    """
    if not dt > 0 and frozen_field is None:
        raise ValueError("time step must be positive")
    clock = partial(_timed, state.timings)
    stats = state.stats
    per = state.periodic
    inline = limiter if limiter.inline else None
    h = 0.5 * dt
    fields = dict(state.fields)

    def x_half(name, f):
        sp = state.species[name]
        with clock("advect_x"):
            f = advect_x(f, h, sp.sqrt_mu, periodic=per, limiter=inline,
                         ghost_width=state.ghost_width, stats=stats)
        if limiter.post:
            with clock("limiter_x"):
                f = apply_post_limiter(f, "x", limiter, per, stats)
        return f

    for name in fields:
        with clock("source"):
            fields[name] = source_half_step(fields[name], state.t, h, state.source)
        fields[name] = x_half(name, fields[name])

    mid = replace(state, fields=fields)
    with clock("poisson"):
        E = mid.solve_field() if frozen_field is None else frozen_field

    for name in fields:
        sp = state.species[name]
        with clock("advect_v"):
            f = advect_v(fields[name], dt, E.E, sp.charge, sp.sqrt_mu, periodic=per,
                         limiter=inline, stats=stats)
        if limiter.post:
            with clock("limiter_v"):
                f = apply_post_limiter(f, "v", limiter, per, stats)
        f = x_half(name, f)
        with clock("source"):
            fields[name] = source_half_step(f, state.t + h, h, state.source)

    new = replace(state, fields=fields, E=E, t=state.t + dt, step=state.step + 1)
    _check_finite(new, new.step)
    return new
