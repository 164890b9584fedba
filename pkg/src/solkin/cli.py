"""Command line entry point: `solkin run | matrices | check`."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import PRESETS, ConfigError, parse_assignments, resolve
from .limiters import LIMITER_MODES


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="solkin", description="1x1v Vlasov-Poisson SOL simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--limiter", choices=LIMITER_MODES)
    r.add_argument("--out", help="output directory")
    r.add_argument("--threads", type=int, help="line-parallel sweep workers")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")

    m = sub.add_parser("matrices", help="print the shift matrices A(alpha), B(alpha)")
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--order", type=int, required=True, help="polynomial degree k")

    sub.add_parser("check", help="run the built-in invariant suite")
    return ap


def _cmd_run(args) -> int:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError([f"--set {item!r}: expected KEY=VALUE"])
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    flags = {"limiter": args.limiter, "output.dir": args.out, "threads": args.threads}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    if args.config is None and args.preset is None:
        raise ConfigError(["run: give --config and/or --preset"])
    cfg = resolve(args.preset, args.config, parse_assignments(overrides))

    from .simulation import run

    result = run(cfg)
    status = "ok" if result.status == 0 else f"aborted ({result.error})"
    print(f"{status}: {result.state.step} steps to t={result.state.t:g} in {result.wall_time:.1f} s;"
          f" outputs in {result.out_dir}")
    return result.status


def _cmd_matrices(args) -> int:
    from .advection import build_matrices

    if not 0.0 <= args.alpha < 1.0:
        raise ValueError("--alpha must lie in [0, 1)")
    A, B = build_matrices(args.order, args.alpha)
    with np.printoptions(precision=16, suppress=False, linewidth=160):
        print(f"A({args.alpha:g}) for k={args.order}:\n{A}")
        print(f"B({args.alpha:g}) for k={args.order}:\n{B}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_checks

    return 0 if run_checks() else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return {"run": _cmd_run, "matrices": _cmd_matrices, "check": _cmd_check}[args.command](args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
