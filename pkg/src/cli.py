"""Command-line front end.

    mopla <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--verbose]

Exit codes: 0 when every enabled check passes, 2 when any check fails,
1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from typing import NoReturn

from src.errors import ConfigurationError, MoplaError, UsageError
from src.runner import SUBCOMMANDS, ScenarioRunner
from src.scenario import parse_config

logger = logging.getLogger(__name__)

EXIT_ERROR = 1

HELP = {
    "solve": "integrate the Galerkin system and write the trajectory and identity series",
    "verify": "solve, then run the identity checks (mass, energy, weak form, coercivity, ...)",
    "probes": "randomized probes of the vector and functional inequalities (needs a seed)",
    "mms": "manufactured-solution convergence on the static unit interval",
    "refine": "self-refinement study against the finest basis size",
    "stability": "sensitivity of the flow to perturbations of the initial datum",
    "motion-check": "finite-difference validation of the domain motion and mass coercivity",
}


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer (got {text!r})") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer (got {value})")
    return value


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors share the configuration exit code."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def create_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mopla",
        description="Spectral Galerkin solver and verification harness for the parabolic "
                    "p-Laplacian on moving domains",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  mopla solve --config scenario.cfg --out runs/static
  mopla verify --config scenario.cfg
  mopla probes --config scenario.cfg --seed 20240601
  mopla refine --config dilation.cfg --out runs/refine

Settings:
  MOPLA_THREADS   number of contiguous quadrature blocks per assembly reduction
        """,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="subcommand")
    subparsers.required = True
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=HELP[name], description=HELP[name])
        sub.add_argument("--config", required=True, help="scenario file (dotted.key = value lines)")
        sub.add_argument("--out", default=None, help="output directory (default: output.dir of the scenario)")
        sub.add_argument("--seed", type=_seed, default=None, help="probe seed, overrides diagnostics.seed")
        sub.add_argument("--verbose", "-v", action="store_true", help="enable DEBUG logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        logger.error("Usage error: %s", exc)
        return EXIT_ERROR
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.diagnostics.seed = args.seed
        if args.out is not None:
            config.output.dir = args.out
        runner = ScenarioRunner(config)
        return asyncio.run(runner.run(args.command))
    except ConfigurationError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_ERROR
    except MoplaError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_ERROR
    except Exception:
        logger.exception("%s failed with an unexpected error", args.command)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
