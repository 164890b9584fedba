"""Scenario construction and the batch run loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, diagnostics, poisson
from .adaptivity import BlockLayout, ShrinkEvent, VAdjustPolicy, adapt_velocity
from .config import RunConfig
from .dg_core import Grid1D, NodalField
from .limiters import LimiterConfig
from .stepper import (SimulationError, SimulationState, electrons, injection_source, ions,
                      strang_step)

log = logging.getLogger("solkin")


def blob_density(sigma: float):
    """f = exp(-x^2 / (2 sigma^2)) exp(-v^2 / 2) / sqrt(2 pi)."""
    def f(x, v):
        return np.exp(-x * x / (2 * sigma * sigma)) * np.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)
    return f


def build_initial_state(cfg: RunConfig) -> SimulationState:
    cfg.validate()
    x = BlockLayout(cfg.L, cfg.fine_cells, cfg.coarse_cells, cfg.refinement_ratio).grid()
    grids = {"e": Grid1D.uniform(-cfg.vmax_e, cfg.vmax_e, cfg.v_cells),
             "i": Grid1D.uniform(-cfg.vmax_i, cfg.vmax_i, cfg.v_cells)}
    if cfg.scenario == "blob":
        init = blob_density(cfg.sigma_value)
        fields = {s: NodalField.from_function(s, x, g, init, cfg.k) for s, g in grids.items()}
        source = None
    else:
        fields = {s: NodalField.zeros(s, x, g, cfg.k) for s, g in grids.items()}
        source = injection_source(cfg.sigma_value, cfg.t0)
    op = poisson.assemble(x, cfg.k, cfg.penalty_scale)
    state = SimulationState(
        fields=fields,
        species={"e": electrons(), "i": ions(cfg.mu)},
        op=op,
        E=poisson.FieldPair.zeros(x, cfg.k),
        source=source,
        ghost_width=cfg.ghost_width or None,
    )
    state.E = state.solve_field()
    return state


@dataclass
class RunResult:
    status: int
    state: SimulationState
    flux: dict
    events: list[ShrinkEvent] = field(default_factory=list)
    wall_time: float = 0.0
    out_dir: Path | None = None
    error: str | None = None


def _attach_log(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> RunResult:
    """Step to t_final writing flux.csv, run.log, config.txt and snapshots.

    Each step runs strang_step, then the shrink check for both species, then
    the diagnostics at the configured cadence.  A non-finite state or a
    Poisson failure stops the run with status 1 after dumping the last
    state.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(cfg.to_text())
    except OSError as exc:
        raise OSError(f"cannot prepare output directory {out}: {exc}") from exc
    handler = _attach_log(out)
    _kernels.set_threads(cfg.threads)
    limiter = LimiterConfig(cfg.limiter, threshold=cfg.threshold)
    policy = VAdjustPolicy(cfg.p, cfg.gamma, cfg.tol, cfg.min_interval)
    events: list[ShrinkEvent] = []
    last: dict = {}
    status, error = 0, None
    t_start = time.perf_counter()
    state = build_initial_state(cfg)
    log.info("start scenario=%s limiter=%s steps=%d x_cells=%d v_cells=%d k=%d",
             cfg.scenario, cfg.limiter, cfg.n_steps, state.f_e.x.n_cells, cfg.v_cells, cfg.k)
    log.info("ghost width: %s", cfg.ghost_width or "ceil(vmax dt / (sqrt(mu) dx)) + 1 per sweep")
    sqrt_mu_i = state.species["i"].sqrt_mu
    writer = diagnostics.FluxWriter(out / "flux.csv")
    try:
        writer.write(diagnostics.flux_row(state.fields, state.E, state.t, sqrt_mu_i))
        for _ in range(cfg.n_steps):
            try:
                before = dict(state.stats.troubled)
                state = strang_step(state, cfg.dt, limiter)
            except (SimulationError, poisson.PoissonError) as exc:
                status, error = 1, str(exc)
                log.error("aborted at step %d: %s", state.step + 1, exc)
                diagnostics.write_snapshot(out / f"snapshot_{state.step}_abort.bin",
                                           state.fields, state.step, state.t)
                break
            if cfg.v_adjust:
                for ev in adapt_velocity(state.fields, state.step, last, policy):
                    events.append(ev)
                    log.info("shrink step=%d species=%s vmax %.6g -> %.6g mass %.17g -> %.17g",
                             ev.step, ev.species, ev.vmax_old, ev.vmax_new, ev.mass_old,
                             ev.mass_new)
            if limiter.mode != "none":
                delta = {k: v - before.get(k, 0) for k, v in state.stats.troubled.items()}
                log.debug("troubled step=%d %s", state.step, delta)
            if state.step % cfg.cadence == 0:
                writer.write(diagnostics.flux_row(state.fields, state.E, state.t, sqrt_mu_i))
            if cfg.snapshot_every and state.step % cfg.snapshot_every == 0:
                diagnostics.write_snapshot(out / f"snapshot_{state.step}.bin", state.fields,
                                           state.step, state.t)
                diagnostics.write_profiles(out / f"profiles_{state.step}.csv", state.fields,
                                           state.E)
    finally:
        writer.close()
        wall = time.perf_counter() - t_start
        log.info("troubled cells per sweep type: %s (outside window: %d)",
                 state.stats.troubled, state.stats.outside_window)
        for phase, secs in sorted(state.timings.items()):
            log.info("timing %-10s %.3f s", phase, secs)
        log.info("finished status=%d steps=%d t=%.6g wall=%.3f s", status, state.step,
                 state.t, wall)
        log.removeHandler(handler)
        handler.close()
    return RunResult(status, state, diagnostics.read_flux(out / "flux.csv"), events, wall, out,
                     error)
