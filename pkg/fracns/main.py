"""
Command-line entry point for fractional Navier-Stokes experiments.
"""

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import List, Optional

import scipy.fft

from .config import EXPERIMENTS, ENV_PREFIX, ExperimentConfig, load_config
from .exceptions import ConfigError, ExperimentError
from .experiment_runner import EXIT_CONFIG, ExperimentRunner
from .logging import configure_logging, get_logger
from .utils import RunResult

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment plus ``run``."""
    parser = argparse.ArgumentParser(
        prog="fracns",
        description="Time-fractional Navier-Stokes solver and verification experiments.",
        epilog=f"Configuration keys can be overridden with {ENV_PREFIX}<KEY> and "
               f"{ENV_PREFIX}<SECTION>__<KEY> environment variables.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--output", type=Path, help="Output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="Random seed (overrides seed)")
    common.add_argument("--threads", type=int, help="Worker threads for FFTs")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Only report errors")

    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    commands.add_parser("run", parents=[common],
                        help="Run the experiment named in the configuration")
    for name in EXPERIMENTS:
        commands.add_parser(name, parents=[common], help=f"Run the {name} experiment")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {"output_dir": str(args.output) if args.output else None,
                 "seed": args.seed,
                 "threads": args.threads}
    if args.command != "run":
        overrides["experiment"] = args.command
    return overrides


def _workers(config: ExperimentConfig):
    if config.threads is None:
        return contextlib.nullcontext()
    return scipy.fft.set_workers(config.threads)


def run_experiment(config: ExperimentConfig, output_dir: Optional[Path] = None) -> RunResult:
    """
    Run the configured experiment with the configured FFT worker count.

    Args:
        config: Validated configuration
        output_dir: Overrides config.output_dir

    Returns:
        RunResult with artifact list and statistics

    Raises:
        ExperimentError: If the run fails; the failed RunResult is attached as .result
    """
    with _workers(config):
        result = ExperimentRunner(config, output_dir).run()
    if not result.success:
        raise ExperimentError(result.errors[0] if result.errors else "experiment failed", result)
    return result


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the fracns command; returns the exit status."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        configure_logging(logging.DEBUG)
    elif args.quiet:
        configure_logging(logging.ERROR)
    else:
        configure_logging(logging.INFO)

    try:
        config = load_config(args.config, overrides=_overrides(args))
    except ConfigError as exc:
        print(f"Configuration error ({exc.key}): {exc}", file=sys.stderr)
        return EXIT_CONFIG

    with _workers(config):
        result = ExperimentRunner(config).run()
    if result.success:
        if not args.quiet:
            print(f"{result.experiment} completed in {result.processing_time:.2f}s; "
                  f"artifacts in {result.output_dir}/")
            for warning in result.warnings:
                print(f"  warning: {warning}")
    else:
        for error in result.errors:
            print(f"Error: {error}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
