"""Command-line entry point.

One subcommand per experiment type; every subcommand takes the same flags:

    rareflow <experiment> --config PATH [--out DIR] [--seed U64]
                          [--threads N] [--no-figures]

Exit codes: 0 success, 2 configuration/schema failure, 3 solver failure,
4 missing or unreadable input file.  Errors are reported as one JSON line on
stderr so callers can parse them.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .config import EXPERIMENT_TYPES, load_config
from .errors import ConfigError, RareflowError, SolverError
from .experiments import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_MISSING = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rareflow",
        description=(
            "Spectral experiments for controlled porous-media-type dynamics: "
            "hypothesis validation, skeleton solves, regularization-rate and "
            "small-noise convergence studies, and action minimization."
        ),
    )
    parser.add_argument("--version", action="version", version=f"rareflow {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_TYPES:
        p = sub.add_parser(name, help=f"run a '{name}' experiment from a config file")
        p.add_argument("--config", required=True, type=Path, help="path to a JSON config")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="Monte Carlo fan-out width")
        p.add_argument(
            "--no-figures", action="store_true", help="skip PNG rendering"
        )
    return parser


def _fail(code: int, kind: str, message: str, field: str | None = None) -> int:
    payload = {"error": kind, "message": message}
    if field:
        payload["field"] = field
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        return _fail(EXIT_MISSING, "missing-file", f"config file not found: {args.config}")
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), getattr(exc, "field", None))

    if cfg.experiment.get("type") != args.experiment:
        return _fail(
            EXIT_CONFIG,
            "config",
            f"config declares experiment {cfg.experiment.get('type')!r} "
            f"but the {args.experiment!r} subcommand was invoked",
            "experiment.type",
        )
    if args.seed is not None:
        if not (0 <= args.seed < 2**64):
            return _fail(EXIT_CONFIG, "config", "--seed must fit in 64 bits", "seed")
        raw = dict(cfg.raw)
        raw["seed"] = args.seed
        cfg = dataclasses.replace(cfg, raw=raw, seed=args.seed)
    if args.threads < 1:
        return _fail(EXIT_CONFIG, "config", "--threads must be >= 1")

    out_dir = args.out or (Path(cfg.out_dir) if cfg.out_dir else Path(f"out-{args.experiment}"))
    try:
        run_experiment(
            cfg, out_dir, render_figures=not args.no_figures, threads=args.threads
        )
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), getattr(exc, "field", None))
    except SolverError as exc:
        return _fail(EXIT_SOLVER, "solver", str(exc))
    except RareflowError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
