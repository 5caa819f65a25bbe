"""Command-line surface: one subcommand per experiment plus config validation.

Usage:
    python run.py cascade --config configs/triangle_cascade.json --out out/
    python run.py sweep --config configs/chain_pump_sweep.json --format json --threads 8
    python run.py validate-config --config configs/chain_preparation.json
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from src import __version__
from src.config import INTEGRATORS, LINDBLAD_CONVENTIONS
from src.errors import EXIT_CONFIG, EXIT_OK, ConfigError, SimulationError
from src.observability import configure_logging, get_metrics_snapshot, run_context
from src.services.config_loader import OUTPUT_FORMATS, SUBCOMMANDS, load_config
from src.services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)

HELP = {
    "couplings": "Kernel and pair coupling curves versus k0r.",
    "cascade": "Full eigenstate decay cascade (JSON + DOT).",
    "lowest-rates": "Lowest (N-1)-excitation decay rate per geometry versus k0r.",
    "evolve": "Free decay of a named initial state.",
    "prepare": "Dissipative dark-state preparation from an inverted state.",
    "sweep": "Target fidelity over a pump phase grid.",
    "optimize": "Phase grid seed followed by Nelder-Mead refinement.",
    "pulse": "Pulsed versus continuous pumping.",
    "rate-map": "Lowest decay rate over two independent distances.",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="Path to the JSON run config.")
    parser.add_argument("--out", help="Output directory (overrides output.directory).")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, help="Output format (overrides output.format).")
    parser.add_argument("--convention", choices=LINDBLAD_CONVENTIONS, help="Lindblad rate convention.")
    parser.add_argument("--threads", type=int, help="Worker threads for sweeps and cascades.")
    parser.add_argument("--integrator", choices=INTEGRATORS, help="Density matrix integrator for time evolution.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Collective spontaneous emission of V-type atom ensembles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Root log level (default: SIM_LOG_LEVEL).")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_common(subparsers.add_parser(name, help=HELP[name]))
    validate = subparsers.add_parser("validate-config", help="Validate a run config without computing anything.")
    _add_common(validate)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be at least 1", key="--threads")
    return {
        "out": args.out,
        "format": args.format,
        "convention": args.convention,
        "threads": args.threads,
        "integrator": args.integrator,
    }


def run_command(args: argparse.Namespace) -> List[str]:
    config = load_config(args.config, _overrides(args))
    if args.command == "validate-config":
        logger.info("Config %s is valid (%s)", args.config, config.subcommand)
        return []
    if config.subcommand != args.command:
        raise ConfigError(
            f"config describes a {config.subcommand!r} run, not {args.command!r}",
            key="$.experiment.subcommand",
        )
    with run_context(config.config_hash, args.command):
        paths = ExperimentService(config).run()
        logger.debug("Metrics: %s", get_metrics_snapshot(include_timings=False))
    return [path.as_posix() for path in paths]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        paths = run_command(args)
    except SimulationError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s rejected its input: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for path in paths:
        print(path)
    if args.command == "validate-config":
        print(f"{args.config}: ok")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
