"""
Main entry point for the pseudomode toolkit.
"""

import sys

from app.cli.runner import run
from app.core.config import get_settings
from app.core.exceptions import ConfigError
from app.core.logging import configure_logging, get_logger


def main() -> int:
    """Main entry point."""
    try:
        settings = get_settings()
        configure_logging(settings.log_level)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return 2
    logger = get_logger("main")

    try:
        return run(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
