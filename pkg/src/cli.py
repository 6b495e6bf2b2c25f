"""Command-line entry point: `run` an experiment config or `validate` it."""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from src.config import Config, ConfigError, format_validation_error, load_experiment_config
from src.experiments.runner import run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MODULE_ERROR = 1
EXIT_CONFIG_ERROR = 2

console = Console(stderr=True)


def setup_logging(level: str):
    logging.basicConfig(
        level=level.upper(),
        format="%(name)s: %(message)s",
        handlers=[RichHandler(console=console, show_time=False, show_path=False)],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="link_lab",
        description="Time-bin link characterization: tomography, COW field trial and key-rate sweeps",
    )
    parser.add_argument("--log-level", default=Config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], type=str.upper)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the experiment described by a config file")
    run.add_argument("--config", required=True, help="Path to the JSON experiment config")
    run.add_argument("--out-dir", default=None, help=f"Output directory (default {Config.OUTPUT_DIR})")
    run.add_argument("--seed", type=int, default=None, help="Override the config's root seed")

    validate = commands.add_parser("validate", help="Check a config file and print its hash")
    validate.add_argument("--config", required=True, help="Path to the JSON experiment config")
    return parser


def _print_config_error(error: Exception):
    if isinstance(error, ValidationError):
        for line in format_validation_error(error):
            print(line, file=sys.stderr)
    else:
        print(str(error), file=sys.stderr)


def _show_metrics(report):
    table = Table(title=f"{report.scenario} run {report.run_id}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for name, value in report.metrics.items():
        table.add_row(name, "n/a" if value is None else f"{value:.6g}")
    console.print(table)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    # the log level itself may come from the environment
    if not Config.validate():
        print("Invalid environment settings, check the LINKLAB_* variables (see config.env.example)",
              file=sys.stderr)
        return EXIT_CONFIG_ERROR
    setup_logging(args.log_level)

    try:
        config = load_experiment_config(args.config)
        if args.command == "run" and args.seed is not None:
            config = config.with_seed(args.seed)
    except (ConfigError, ValidationError) as e:
        _print_config_error(e)
        return EXIT_CONFIG_ERROR

    if args.command == "validate":
        print(config.config_hash())
        return EXIT_OK

    try:
        report = run_experiment(config, args.out_dir)
    except ValueError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MODULE_ERROR

    console.print(Panel.fit(f"Run {report.run_id} written (config {report.config_hash[:12]})", style="bold blue"))
    _show_metrics(report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
