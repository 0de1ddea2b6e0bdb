"""Command line interface.

Usage:
    hypergrad <command> --config <path> [--out <dir>] [--seed <int> ...]

Commands: accuracy, hessian-viz, overfit-val, distill, split-study, run.
The command must match the `experiment` key inside the config file; --out
and --seed override the config's `out` and `seeds` keys.

Exit codes: 0 on success, 1 on configuration or input errors, 2 on numeric
failures (divergence, non-finite values, capacity overruns).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import (
    CapacityError,
    ConfigError,
    CsvParseError,
    DimensionError,
    NumericError,
    ValidationError,
)
from .experiments import COMMANDS, DISPATCH, parse_config

_USAGE_ERRORS = (ConfigError, ValidationError, CsvParseError, DimensionError)
_NUMERIC_ERRORS = (NumericError, CapacityError)


class _Parser(argparse.ArgumentParser):
    """argparse exits with its own codes on bad usage; route those through
    the config-error path instead so the exit code contract holds."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="hypergrad",
        description="Gradient-based hyperparameter optimization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", required=True, help="path to a key = value config file")
        cmd.add_argument("--out", default=None, help="output directory (overrides `out`)")
        cmd.add_argument(
            "--seed", type=int, nargs="+", default=None,
            help="seeds to run (overrides `seeds`)",
        )
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = parse_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(
                f"config declares experiment = {cfg.kind!r} but the "
                f"{args.command!r} command was invoked"
            )
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out_dir=Path(args.out))
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seeds=tuple(args.seed))
        paths = DISPATCH[cfg.kind](cfg)
        for path in paths:
            print(path)
        return 0
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
