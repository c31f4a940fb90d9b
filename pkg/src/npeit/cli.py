"""Command-line entry point.

``np-eit <subcommand> --config <file> [--out <dir>]`` runs one experiment
and writes its CSV into the output directory (``--out`` overrides the
config's ``[output] dir``).  Exit codes: 0 success, 2 configuration or
assertion failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .exceptions import (ConditioningError, ConfigError, CurveError,
                         EvaluationDomainError, IndeterminatePointError,
                         SeparationError, SolverError)
from .experiments import (run_expansion, run_oracle_check, run_spectrum,
                          run_stability, run_sweep)

_COMMANDS = {
    "spectrum": (run_spectrum, "report the leading boundary-operator "
                               "eigenpairs"),
    "sweep": (run_sweep, "sweep the conductivity ladder against the "
                         "high-contrast limits"),
    "stability": (run_stability, "rank inclusion pairs by their ladder "
                                 "trace gap"),
    "expand": (run_expansion, "spectral expansion of one transmission "
                              "solve, both coefficient routes"),
    "oracle-check": (run_oracle_check, "self-check the concentric-disk "
                                       "closed forms"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="np-eit",
        description="Boundary-integral experiments for a two-dimensional "
                    "conductivity problem with one inclusion.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True,
                         help="experiment config file")
        cmd.add_argument("--out", default=None,
                         help="output directory for CSV "
                              "(default: [output] dir from the config)")
    return parser


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = args.out if args.out is not None else config.out_dir
        if out is None:
            raise ConfigError("no output directory: pass --out or set "
                              "[output] dir in the config")
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command][0](config, out_dir)
    except (ConfigError, CurveError, SeparationError,
            IndeterminatePointError, EvaluationDomainError,
            AssertionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ConditioningError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
