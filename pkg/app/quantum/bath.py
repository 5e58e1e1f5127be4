"""
System-bath decomposition: exponential bath correlation functions and the
Lorentzian spectral-density-to-pseudomode mapping.

All frequencies are dimensionless multiples of a reference frequency (in
practice omega0 = 1 sets the scale).
"""

from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import DomainError
from app.core.logging import get_logger

logger = get_logger("quantum.bath")

ArrayLike = Union[float, np.ndarray]


class Pseudomode(BaseModel):
    """One exponential term alpha^2 exp(-i omega t - gamma t / 2) of C(t)."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=0.0)
    omega: float
    gamma: float = Field(..., gt=0.0)


class PseudomodeSpec(BaseModel):
    """System frequency plus the ordered pseudomode expansion of the bath."""

    model_config = ConfigDict(frozen=True)

    omega0: float = Field(..., gt=0.0)
    modes: Tuple[Pseudomode, ...] = Field(..., min_length=1)

    @classmethod
    def single(cls, omega0: float, alpha: float, omega: float, gamma: float) -> "PseudomodeSpec":
        """One-mode bath."""
        return cls(omega0=omega0, modes=(Pseudomode(alpha=alpha, omega=omega, gamma=gamma),))

    @property
    def n_modes(self) -> int:
        """Number of pseudomodes N."""
        return len(self.modes)

    @property
    def alphas(self) -> np.ndarray:
        """Couplings alpha_j."""
        return np.array([m.alpha for m in self.modes], dtype=float)

    @property
    def omegas(self) -> np.ndarray:
        """Mode frequencies Omega_j."""
        return np.array([m.omega for m in self.modes], dtype=float)

    @property
    def gammas(self) -> np.ndarray:
        """Mode widths gamma_j."""
        return np.array([m.gamma for m in self.modes], dtype=float)

    def with_mode(self, index: int = 0, **overrides: float) -> "PseudomodeSpec":
        """Copy with mode `index` (0-based) altered."""
        if not 0 <= index < self.n_modes:
            raise DomainError(f"mode index {index} out of range for {self.n_modes} modes")
        modes = list(self.modes)
        modes[index] = Pseudomode(**{**modes[index].model_dump(), **overrides})
        return PseudomodeSpec(omega0=self.omega0, modes=tuple(modes))

    def is_resonant(self) -> bool:
        """True when every mode sits at omega0."""
        return all(m.omega == self.omega0 for m in self.modes)


class LorentzianBath(BaseModel):
    """J(w) = (1/2pi) coupling * width^2 / ((w - omega0)^2 + width^2)."""

    model_config = ConfigDict(frozen=True)

    coupling: float = Field(..., ge=0.0)
    width: float = Field(..., gt=0.0)
    omega0: float = Field(..., gt=0.0)


def lorentzian_to_pseudomode(bath: LorentzianBath) -> PseudomodeSpec:
    """
    Map a Lorentzian bath onto a single resonant pseudomode.

    C(t) = coupling * width / 2 * exp(-(width + i omega0) t) is matched term by
    term: alpha^2 = coupling * width / 2, Omega = omega0, gamma = 2 * width.
    """
    if bath.width <= 0:
        raise DomainError(f"Lorentzian width must be positive, got {bath.width}")

    alpha = float(np.sqrt(0.5 * bath.coupling * bath.width))
    spec = PseudomodeSpec.single(
        omega0=bath.omega0,
        alpha=alpha,
        omega=bath.omega0,
        gamma=2.0 * bath.width
    )
    logger.debug(f"Lorentzian bath {bath} mapped to alpha={alpha}, gamma={2.0 * bath.width}")
    return spec


def spectral_density(bath: LorentzianBath, omega: ArrayLike) -> ArrayLike:
    """Evaluate the Lorentzian spectral density J(omega)."""
    detuning = np.asarray(omega, dtype=float) - bath.omega0
    value = bath.coupling * bath.width ** 2 / (2.0 * np.pi * (detuning ** 2 + bath.width ** 2))
    return value if np.ndim(value) else float(value)


def correlation_function(spec: PseudomodeSpec, t: ArrayLike) -> Union[complex, np.ndarray]:
    """C(t) = sum_i alpha_i^2 exp(-i Omega_i t - gamma_i t / 2) for t >= 0."""
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("correlation function is defined for t >= 0 only")

    exponents = -(1j * spec.omegas + 0.5 * spec.gammas)
    terms = spec.alphas ** 2 * np.exp(np.multiply.outer(times, exponents))
    value = terms.sum(axis=-1)
    return value if np.ndim(value) else complex(value)
