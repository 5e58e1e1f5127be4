"""
Time evolution: numeric integration of the pseudomode master equation, the
coherent-state closed form P(t), and the Born-Markov reduction.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply
from scipy.special import factorial
from scipy.stats import poisson

from app.core.config import get_settings
from app.core.exceptions import DomainError, IntegrationError
from app.core.logging import get_logger
from app.quantum.bath import PseudomodeSpec
from app.quantum.liouvillian import (
    LiouvillianOperator,
    TruncationSpec,
    build_damped_oscillator_liouvillian,
    partial_trace_pseudomodes,
    unvectorize,
    vectorize,
)
from app.quantum.spectral import build_dynamical_matrix

logger = get_logger("quantum.dynamics")

EP_SWITCH = 1e-6

TimeLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class CoherentAmplitudeState:
    """Amplitude vector (system first, then pseudomodes) of a product coherent state."""

    xi: float
    amplitudes: np.ndarray

    @classmethod
    def initial(cls, xi: float, n_modes: int) -> "CoherentAmplitudeState":
        """System at amplitude xi, every pseudomode in vacuum."""
        amplitudes = np.zeros(n_modes + 1, dtype=complex)
        amplitudes[0] = xi
        return cls(xi=float(xi), amplitudes=amplitudes)


@dataclass(frozen=True)
class Trajectory:
    """
    Reduced system dynamics on a time grid.

    representation "density": `states` holds one reduced density matrix per time.
    representation "amplitude": `amplitudes` holds xi * P(t) of a coherent state.
    """

    times: np.ndarray
    representation: str
    states: Optional[np.ndarray] = None
    amplitudes: Optional[np.ndarray] = None
    distances: Optional[np.ndarray] = None
    xi: Optional[float] = None
    leakage: bool = False

    def __post_init__(self):
        if self.representation not in ("density", "amplitude"):
            raise DomainError(f"unknown representation '{self.representation}'")
        if len(self.times) < 1 or np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    def with_distances(self, distances: np.ndarray) -> "Trajectory":
        """Copy carrying a distance-to-equilibrium series."""
        return replace(self, distances=np.asarray(distances, dtype=float))

    def mean_amplitude(self) -> np.ndarray:
        """<a_0>(t); equals xi * P(t) for coherent input."""
        if self.representation == "amplitude":
            return self.amplitudes
        n = self.states.shape[-1]
        a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)
        return np.einsum("ij,tji->t", a, self.states)

    def propagator(self) -> np.ndarray:
        """P(t) = <a_0>(t) / xi."""
        if not self.xi:
            raise DomainError("P(t) needs a nonzero coherent amplitude xi")
        return self.mean_amplitude() / self.xi

    def trace_drift(self) -> float:
        """Largest |Tr rho(t) - 1| over the grid."""
        return float(np.max(np.abs(np.einsum("tii->t", self.states) - 1.0)))

    def hermiticity_error(self) -> float:
        """Largest entry of rho(t) - rho(t)^dagger over the grid."""
        return float(np.max(np.abs(self.states - np.conj(np.swapaxes(self.states, 1, 2)))))

    def purity(self) -> np.ndarray:
        """Tr rho(t)^2 at every time."""
        return np.real(np.einsum("tij,tji->t", self.states, self.states))


class MarkovianReduction(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma_m: float
    lamb_shift: float
    omega0: float

    @property
    def gap(self) -> float:
        """Markovian spectral gap gamma_M / 2."""
        return 0.5 * self.gamma_m


def _check_times(t: TimeLike) -> np.ndarray:
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("times must be nonnegative")
    return times


def coherent_cutoff(xi: float, tail: float = 1e-10) -> int:
    """Smallest Fock cutoff whose Poisson tail beyond the kept levels is below `tail`."""
    mean = abs(xi) ** 2
    cutoff = 2
    while poisson.sf(cutoff - 1, mean) >= tail:
        cutoff += 1
    return cutoff


def coherent_state(xi: complex, cutoff: int) -> np.ndarray:
    """|xi><xi| in a Fock space truncated to `cutoff` levels, renormalized."""
    n = np.arange(cutoff)
    psi = np.exp(-0.5 * abs(xi) ** 2) * np.power(complex(xi), n) / np.sqrt(factorial(n))
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Square, Hermitian, unit trace and positive semidefinite, within `tol`."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"a density matrix must be square, got shape {rho.shape}")
    rho = rho.astype(complex)
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise DomainError("density matrix is not Hermitian")
    trace = np.trace(rho)
    if abs(trace - 1.0) > tol:
        raise DomainError(f"density matrix trace is {trace.real!r}, expected 1")
    lowest = float(np.min(np.linalg.eigvalsh(rho)))
    if lowest < -tol:
        raise DomainError(f"density matrix has a negative eigenvalue {lowest!r}")
    return rho


def initial_state(rho_s: np.ndarray, trunc: TruncationSpec) -> np.ndarray:
    """rho_s kron |0...0><0...0| of the pseudomodes."""
    rho_s = np.asarray(rho_s, dtype=complex)
    if rho_s.shape != (trunc.n_sys, trunc.n_sys):
        raise DomainError(f"system state must be {trunc.n_sys}x{trunc.n_sys}, got {rho_s.shape}")
    vacuum = np.zeros((trunc.pseudomode_dimension,) * 2, dtype=complex)
    vacuum[0, 0] = 1.0
    return np.kron(rho_s, vacuum)


def _edge_population(rho: np.ndarray, dims: Sequence[int]) -> float:
    """Largest population of the highest kept Fock level over all modes."""
    populations = np.real(np.diag(rho)).reshape(dims)
    edges = []
    for axis in range(len(dims)):
        marginal = populations.sum(axis=tuple(k for k in range(len(dims)) if k != axis))
        edges.append(marginal[-1])
    return float(max(edges))


def _integrate(L: LiouvillianOperator, vec0: np.ndarray, times: np.ndarray, method: str) -> np.ndarray:
    settings = get_settings()
    if method == "rk":
        solution = solve_ivp(
            lambda _t, y: L.matrix @ y,
            t_span=(times[0], times[-1]),
            y0=vec0,
            method="DOP853",
            t_eval=times,
            rtol=settings.ode_rtol,
            atol=settings.ode_atol
        )
        if solution.status != 0:
            raise IntegrationError(f"integration failed: {solution.message}")
        logger.debug(f"DOP853 finished with {solution.nfev} evaluations")
        return solution.y.T

    if method == "expm":
        out = np.empty((len(times), len(vec0)), dtype=complex)
        out[0] = vec0
        for k in range(1, len(times)):
            out[k] = expm_multiply(L.matrix * (times[k] - times[k - 1]), out[k - 1])
        return out

    raise DomainError(f"unknown integration method '{method}'")


def evolve_master_equation(
    L: LiouvillianOperator,
    rho0: np.ndarray,
    times: Sequence[float],
    method: str = "rk",
    xi: Optional[float] = None
) -> Trajectory:
    """
    Integrate d rho / dt = L rho on the grid and reduce to the system.

    rho0 is the state at times[0]. Operators without pseudomodes (the Markov
    generator) are returned unreduced.
    """
    times = _check_times(times)
    dim = L.dimension
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (dim, dim):
        raise DomainError(f"initial state must be {dim}x{dim}, got {rho0.shape}")
    if len(times) < 2 or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing with at least two points")

    vectors = _integrate(L, vectorize(rho0), times, method)

    dims = L.trunc.dims if L.trunc is not None else (dim,)
    threshold = get_settings().leakage_threshold
    reduced = []
    edge = 0.0
    drift = 0.0
    for vec in vectors:
        rho = unvectorize(vec, dim)
        edge = max(edge, _edge_population(rho, dims))
        drift = max(drift, abs(np.trace(rho) - 1.0))
        reduced.append(partial_trace_pseudomodes(rho, L.trunc) if L.trunc is not None else rho)

    leakage = edge > threshold
    if leakage:
        logger.warning(
            f"Truncation leakage: highest Fock level population {edge:.3e} exceeds {threshold:.1e}"
        )
    logger.debug(f"trace drift over horizon {drift:.3e}")

    return Trajectory(
        times=times,
        representation="density",
        states=np.array(reduced),
        xi=xi,
        leakage=leakage
    )


def analytic_P(spec: PseudomodeSpec, t: TimeLike) -> Union[complex, np.ndarray]:
    """
    Coherent-state amplitude factor P(t) = <a_0>(t) / xi.

    A single resonant pseudomode uses
        P = exp(-i w0 t - g t / 4) [cosh(k t) + g / (4 k) sinh(k t)],
        k = sqrt(g^2 / 16 - alpha^2),
    with the exceptional-point limit 1 + g t / 4 when k vanishes. Otherwise
    P is the (0, 0) entry of exp(t M).
    """
    times = _check_times(t)

    if spec.n_modes == 1 and spec.is_resonant():
        mode = spec.modes[0]
        kappa = np.sqrt(complex(mode.gamma ** 2 / 16.0 - mode.alpha ** 2))
        phase = np.exp(-1j * spec.omega0 * times)
        t_max = float(np.max(times)) if times.size else 0.0
        if abs(kappa) * t_max < EP_SWITCH:
            value = phase * np.exp(-0.25 * mode.gamma * times) * (1.0 + 0.25 * mode.gamma * times)
        else:
            # cosh + ratio * sinh as two decaying exponentials
            ratio = mode.gamma / (4.0 * kappa)
            slow = np.exp((kappa - 0.25 * mode.gamma) * times)
            fast = np.exp((-kappa - 0.25 * mode.gamma) * times)
            value = phase * (0.5 * (1.0 + ratio) * slow + 0.5 * (1.0 - ratio) * fast)
    else:
        generator = build_dynamical_matrix(spec).entries
        value = np.array([linalg.expm(tk * generator)[0, 0] for tk in times.ravel()]).reshape(times.shape)

    return value if np.ndim(value) else complex(value)


def evolve_amplitudes(spec: PseudomodeSpec, xi: float, times: Sequence[float]) -> Trajectory:
    """v(t) = exp(M t) v(0) for the product coherent state; keeps the system entry."""
    times = _check_times(times)
    state = CoherentAmplitudeState.initial(xi, spec.n_modes)
    generator = build_dynamical_matrix(spec).entries
    amplitudes = np.array([(linalg.expm(tk * generator) @ state.amplitudes)[0] for tk in times])
    return Trajectory(times=times, representation="amplitude", amplitudes=amplitudes, xi=float(xi))


def markovian_reduction(spec: PseudomodeSpec) -> MarkovianReduction:
    """gamma_M = sum 2 alpha^2 / gamma, Lamb shift = sum 4 alpha^2 Omega / gamma^2."""
    alphas, omegas, gammas = spec.alphas, spec.omegas, spec.gammas
    return MarkovianReduction(
        gamma_m=float(np.sum(2.0 * alphas ** 2 / gammas)),
        lamb_shift=float(np.sum(4.0 * alphas ** 2 * omegas / gammas ** 2)),
        omega0=spec.omega0
    )


def markovian_P(
    red: MarkovianReduction,
    t: TimeLike,
    include_lamb_shift: bool = False
) -> Union[complex, np.ndarray]:
    """P_M(t) = exp(-gamma_M t / 2 - i w0 t); the Lamb shift enters the phase only on request."""
    times = _check_times(t)
    frequency = red.omega0 + (red.lamb_shift if include_lamb_shift else 0.0)
    value = np.exp(-0.5 * red.gamma_m * times - 1j * frequency * times)
    return value if np.ndim(value) else complex(value)


def markovian_eigenvalues(red: MarkovianReduction, index: Sequence[int]) -> complex:
    """lambda^M = -gamma_M (m_1 + n_1) / 2 - i w0 (m_0 - n_0)."""
    index = list(index)
    if len(index) != 4:
        raise DomainError(f"Markovian index is (m0, n0, m1, n1), got {index}")
    if any(int(k) != k or k < 0 for k in index):
        raise DomainError(f"index entries must be nonnegative integers: {index}")
    m0, n0, m1, n1 = index
    return complex(-0.5 * red.gamma_m * (m1 + n1) - 1j * red.omega0 * (m0 - n0))


def analytic_trajectory(
    spec: PseudomodeSpec,
    xi: float,
    times: Sequence[float],
    markovian: bool = False,
    include_lamb_shift: bool = False
) -> Trajectory:
    """Amplitude trajectory xi * P(t) from the closed form or its Markov limit."""
    times = _check_times(times)
    if markovian:
        factor = markovian_P(markovian_reduction(spec), times, include_lamb_shift)
    else:
        factor = analytic_P(spec, times)
    return Trajectory(
        times=times,
        representation="amplitude",
        amplitudes=xi * np.asarray(factor, dtype=complex),
        xi=float(xi)
    )


def markovian_liouvillian(
    red: MarkovianReduction,
    n_sys: int,
    include_lamb_shift: bool = False
) -> LiouvillianOperator:
    """Lindblad generator of the system alone with the Markovian rate."""
    frequency = red.omega0 + (red.lamb_shift if include_lamb_shift else 0.0)
    return build_damped_oscillator_liouvillian(frequency, red.gamma_m, n_sys)


def evolve_markovian(
    red: MarkovianReduction,
    rho_s0: np.ndarray,
    times: Sequence[float],
    include_lamb_shift: bool = False,
    xi: Optional[float] = None
) -> Trajectory:
    """Numeric evolution under the Born-Markov generator on the system alone."""
    rho_s0 = np.asarray(rho_s0, dtype=complex)
    L = markovian_liouvillian(red, rho_s0.shape[0], include_lamb_shift)
    return evolve_master_equation(L, rho_s0, times, xi=xi)
