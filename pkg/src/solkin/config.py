"""Run configuration: flat key=value files, presets and validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .dg_core import MAX_DEGREE
from .limiters import LIMITER_MODES

SCENARIOS = ("blob", "injection")


class ConfigError(ValueError):
    """Raised with every violation found, one per line, keyed by config path."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def _key(name: str, **kw):
    return field(metadata={"key": name}, **kw)


@dataclass(frozen=True)
class RunConfig:
    L: float = _key("L", default=200.0)
    dt: float = _key("dt", default=0.1)
    k: int = _key("k", default=3)
    mu: float = _key("mu", default=400.0)
    vmax_e: float = _key("vmax_e", default=12.0)
    vmax_i: float = _key("vmax_i", default=12.0)
    fine_cells: int = _key("mesh.fine_block_cells", default=50)
    coarse_cells: int = _key("mesh.coarse_block_cells", default=50)
    refinement_ratio: int = _key("mesh.refinement_ratio", default=1)
    # 0 selects the per-sweep automatic width
    ghost_width: int = _key("mesh.ghost_width", default=0)
    v_cells: int = _key("v_cells", default=40)
    t_final: float = _key("t_final", default=1000.0)
    scenario: str = _key("scenario", default="blob")
    # 0 selects sigma = 0.1 L
    sigma: float = _key("sigma", default=0.0)
    t0: float = _key("t0", default=2000.0)
    limiter: str = _key("limiter", default="none")
    threshold: float = _key("limiter.threshold", default=0.5)
    v_adjust: bool = _key("adaptivity.v_adjust", default=True)
    p: float = _key("adaptivity.p", default=0.05)
    gamma: float = _key("adaptivity.gamma", default=0.05)
    tol: float = _key("adaptivity.tol", default=1e-14)
    min_interval: int = _key("adaptivity.min_interval", default=10)
    penalty_scale: float = _key("poisson.penalty_scale", default=10.0)
    cadence: int = _key("output.cadence", default=1)
    # 0 disables snapshots and profiles
    snapshot_every: int = _key("output.snapshot_every", default=0)
    out_dir: str = _key("output.dir", default="solkin_out")
    threads: int = _key("threads", default=1)

    @property
    def sigma_value(self) -> float:
        return self.sigma if self.sigma > 0 else 0.1 * self.L

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def validate(self) -> "RunConfig":
        problems = []
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            key = f.metadata["key"]
            if f.name in ("L", "dt", "mu", "vmax_e", "vmax_i", "t0", "threshold", "tol",
                          "penalty_scale", "p") and not val > 0:
                problems.append(f"{key}: must be positive (got {val!r})")
            if f.name in ("fine_cells", "coarse_cells", "refinement_ratio", "v_cells",
                          "cadence", "threads", "min_interval") and not val >= 1:
                problems.append(f"{key}: must be a positive integer (got {val!r})")
            if f.name in ("ghost_width", "snapshot_every", "sigma", "gamma", "t_final") and val < 0:
                problems.append(f"{key}: must be non-negative (got {val!r})")
        if not 0 <= self.k <= MAX_DEGREE:
            problems.append(f"k: degree must lie in 0..{MAX_DEGREE} (got {self.k})")
        if self.scenario not in SCENARIOS:
            problems.append(f"scenario: must be one of {SCENARIOS} (got {self.scenario!r})")
        if self.limiter not in LIMITER_MODES:
            problems.append(f"limiter: must be one of {LIMITER_MODES} (got {self.limiter!r})")
        if not self.p + self.gamma < 1:
            problems.append("adaptivity.p + adaptivity.gamma: must be below 1")
        if self.t_final > 0 and abs(self.n_steps * self.dt - self.t_final) > 1e-9 * self.t_final:
            problems.append(f"t_final: {self.t_final} is not a whole number of steps of dt={self.dt}")
        if problems:
            raise ConfigError(problems)
        return self

    def to_text(self) -> str:
        """Resolved config in the key=value file format."""
        lines = ["# resolved solkin configuration"]
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, bool):
                val = "on" if val else "off"
            lines.append(f"{f.metadata['key']} = {val}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.metadata["key"]: f for f in dataclasses.fields(RunConfig)}


def _convert(key: str, text: str):
    f = _FIELDS[key]
    typ = f.type if isinstance(f.type, type) else {"float": float, "int": int, "str": str,
                                                    "bool": bool}[f.type]
    text = text.strip()
    if typ is bool:
        low = text.lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ValueError(f"expected on/off, got {text!r}")
    if typ is int:
        val = float(text)
        if val != int(val):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(val)
    return typ(text)


def parse_assignments(items: dict) -> dict:
    """Map config keys to typed field values, collecting every problem."""
    out, problems = {}, []
    for key, text in items.items():
        if key not in _FIELDS:
            problems.append(f"{key}: unknown key")
            continue
        try:
            out[_FIELDS[key].name] = _convert(key, str(text))
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return out


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat `key = value` lines; `#` starts a comment."""
    items, problems = {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        items[key] = val
    try:
        values = parse_assignments(items)
    except ConfigError as exc:
        problems += exc.problems
    if problems:
        raise ConfigError(problems)
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config file ({exc.strerror})"]) from exc
    return parse_config_text(text, str(path))


# Presets are given in cells: at k = 3 every cell carries 4 nodes, so
# 300 x cells and 150 v cells give 1200 x 600 degrees of freedom.
PRESETS: dict[str, dict] = {
    "blob-paper": dict(scenario="blob", fine_cells=100, coarse_cells=100, refinement_ratio=1,
                       v_cells=150, t_final=4000.0),
    "injection-paper": dict(scenario="injection", fine_cells=100, coarse_cells=100,
                            refinement_ratio=8, v_cells=150, t_final=8000.0),
    "blob-desk": dict(scenario="blob", fine_cells=50, coarse_cells=50, refinement_ratio=1,
                      v_cells=40, t_final=1000.0),
    "injection-desk": dict(scenario="injection", fine_cells=50, coarse_cells=50,
                           refinement_ratio=4, v_cells=40, t_final=3000.0),
}


def resolve(preset: str | None = None, file: str | Path | None = None,
            overrides: dict | None = None) -> RunConfig:
    """Defaults, then the preset, then the file, then explicit overrides."""
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError([f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}"])
        values.update(PRESETS[preset])
    if file is not None:
        values.update(load_config_file(file))
    values.update(overrides or {})
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from exc
    return cfg.validate()
