"""
Exception hierarchy shared by the numerical modules and the CLI.
"""

from typing import Optional, Sequence


class PseudomodeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PseudomodeError, ValueError):
    """An argument lies outside the domain of an operation."""


class DimensionLimitError(PseudomodeError, ValueError):
    """A truncated Hilbert space is larger than the configured limit."""


class NumericError(PseudomodeError, RuntimeError):
    """A numerical procedure failed to meet its accuracy contract."""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class GapUndefinedError(NumericError):
    """No root decays, so the spectral gap does not exist."""


class MultiplicityError(NumericError):
    """The Liouvillian null space is degenerate."""

    def __init__(self, message: str, multiplicity: int):
        super().__init__(message)
        self.multiplicity = multiplicity


class IntegrationError(NumericError):
    """The ODE integrator stopped before reaching the end of the grid."""


class ConfigError(PseudomodeError, ValueError):
    """A run configuration could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
