"""
Command-line runner.
"""

import argparse
from pathlib import Path
from typing import List, Optional, Sequence

from app.cli.commands import COMMANDS, CommandOptions
from app.cli.csv_output import write_summary
from app.cli.run_config import RunConfig, load_config
from app.core.config import get_settings
from app.core.exceptions import ConfigError, PseudomodeError
from app.core.logging import configure_logging, get_logger
from app.quantum.mpemba import DistanceKind

logger = get_logger("cli.runner")


def build_parser() -> argparse.ArgumentParser:
    """Command-line interface: one positional command plus overrides."""
    parser = argparse.ArgumentParser(
        prog="pseudomode",
        description="Pseudomode relaxation, Liouvillian exceptional points and Mpemba crossings."
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", help="output directory (overrides [output] directory)")
    parser.add_argument("--markovian", action="store_true", help="use the Born-Markov generator")
    parser.add_argument("--distance", choices=[kind.value for kind in DistanceKind],
                        help="distance to equilibrium (overrides [output] distance)")
    parser.add_argument("--threads", type=int, help="worker threads for sweeps and state pairs")
    parser.add_argument("--log-level", help="logging level (overrides PSEUDOMODE_LOG_LEVEL)")
    return parser


def resolve_options(config: RunConfig, args: argparse.Namespace) -> CommandOptions:
    """Command-line flags take precedence over the [output] section."""
    threads = args.threads if args.threads is not None else get_settings().threads
    if threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {threads}")
    return CommandOptions(
        out_dir=Path(args.out or config.output.directory),
        distance=DistanceKind(args.distance) if args.distance else config.output.distance,
        markovian=args.markovian or config.output.markovian,
        lamb_shift=config.output.lamb_shift,
        threads=threads
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return the process exit status."""
    args = build_parser().parse_args(argv)

    try:
        if args.log_level:
            configure_logging(args.log_level)
        config = load_config(args.config)
        options = resolve_options(config, args)
        logger.info(f"Running '{args.command}' into {options.out_dir}")
        lines: List[str] = COMMANDS[args.command](config, options)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except PseudomodeError as e:
        logger.error(f"'{args.command}' failed: {e}")
        return 1

    write_summary(options.out_dir / "summary.txt", lines)
    print("\n".join(lines))
    logger.info(f"'{args.command}' finished")
    return 0
