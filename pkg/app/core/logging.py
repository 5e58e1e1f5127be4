"""
Logging configuration.

Records go to stderr; stdout carries the command summaries.
"""

import logging
import sys
from typing import Union

from app.core.exceptions import ConfigError

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def resolve_level(level: Union[str, int]) -> int:
    """Level number for a name such as "debug"; unknown names raise ConfigError."""
    if isinstance(level, int):
        return level
    value = logging.getLevelName(str(level).strip().upper())
    if not isinstance(value, int):
        raise ConfigError(f"unknown log level '{level}' (PSEUDOMODE_LOG_LEVEL or --log-level)")
    return value


def configure_logging(level: Union[str, int] = "INFO") -> None:
    """Configure root logging; numpy/scipy warnings are routed through `py.warnings`."""
    logging.basicConfig(
        level=resolve_level(level),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True
    )
    logging.captureWarnings(True)


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance."""
    return logging.getLogger(name)
