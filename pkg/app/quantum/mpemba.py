"""
Distances to equilibrium, Mpemba crossing detection and (gamma, alpha) gap sweeps.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from app.core.exceptions import DomainError
from app.core.logging import get_logger
from app.quantum.bath import PseudomodeSpec
from app.quantum.dynamics import Trajectory, markovian_reduction
from app.quantum.spectral import detect_lep, spectral_gap, spectrum_of

logger = get_logger("quantum.mpemba")


class DistanceKind(str, Enum):
    CLOSED_FORM = "closed"
    HILBERT_SCHMIDT_HALF = "hs"
    TRACE_NORM = "trace"


@dataclass(frozen=True)
class CrossingReport:
    crossed: bool
    t_cross: Optional[float]
    bracket: Optional[Tuple[float, float]]
    ordering_at_zero: int


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    alpha: float
    gap: float
    gap_markovian: float
    is_lep: bool


def coherent_distance(
    abs_amplitude_sq: Union[float, np.ndarray],
    kind: DistanceKind = DistanceKind.CLOSED_FORM
) -> Union[float, np.ndarray]:
    """
    Distance between the coherent state |xi P> and the vacuum, from x = |xi P|^2.

    The closed form sqrt(1 - exp(-x)) is also the exact trace distance of two pure
    states; half the Hilbert-Schmidt norm is smaller by sqrt(2).
    """
    x = np.asarray(abs_amplitude_sq, dtype=float)
    if np.any(x < 0):
        raise DomainError("|xi P|^2 must be nonnegative")
    value = np.sqrt(-np.expm1(-x))
    if DistanceKind(kind) is DistanceKind.HILBERT_SCHMIDT_HALF:
        value = value / np.sqrt(2.0)
    return value if np.ndim(value) else float(value)


def distance_to_equilibrium(
    state: Union[float, np.ndarray],
    eq: Optional[np.ndarray] = None,
    kind: DistanceKind = DistanceKind.HILBERT_SCHMIDT_HALF
) -> float:
    """
    Distance of a state from equilibrium.

    For CLOSED_FORM `state` is the scalar |xi P(t)|^2 and `eq` is unused.
    """
    kind = DistanceKind(kind)
    if kind is DistanceKind.CLOSED_FORM:
        if np.ndim(state) != 0:
            raise DomainError("the closed-form distance takes |xi P|^2, not a matrix")
        return coherent_distance(float(state), kind)

    state = np.asarray(state, dtype=complex)
    eq = np.asarray(eq, dtype=complex)
    if state.shape != eq.shape:
        raise DomainError(f"dimension mismatch: {state.shape} vs {eq.shape}")
    difference = state - eq
    if kind is DistanceKind.HILBERT_SCHMIDT_HALF:
        return float(0.5 * np.linalg.norm(difference, "fro"))
    return float(0.5 * np.linalg.norm(difference, "nuc"))


def vacuum(dim: int) -> np.ndarray:
    """|0><0| on `cutoff` levels."""
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def attach_distances(
    trajectory: Trajectory,
    kind: DistanceKind = DistanceKind.CLOSED_FORM,
    eq: Optional[np.ndarray] = None
) -> Trajectory:
    """Fill in distances to equilibrium (the vacuum unless `eq` is given)."""
    kind = DistanceKind(kind)
    if trajectory.representation == "amplitude":
        distances = coherent_distance(np.abs(trajectory.amplitudes) ** 2, kind)
    elif kind is DistanceKind.CLOSED_FORM:
        if trajectory.xi is None:
            raise DomainError("the closed-form distance applies to coherent-state trajectories only")
        distances = coherent_distance(np.abs(trajectory.mean_amplitude()) ** 2, kind)
    else:
        eq = vacuum(trajectory.states.shape[-1]) if eq is None else eq
        distances = np.array([distance_to_equilibrium(rho, eq, kind) for rho in trajectory.states])
    return trajectory.with_distances(distances)


def markovian_distance(xi: float, gamma_m: float, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """sqrt(1 - exp(-|xi|^2 exp(-gamma_M t)))."""
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("times must be nonnegative")
    return coherent_distance(abs(xi) ** 2 * np.exp(-gamma_m * times))


def _interpolated_difference(times: np.ndarray, d1: np.ndarray, d2: np.ndarray):
    """Difference of the two curves, interpolated in log space when both stay positive."""
    if np.all(d1 > 0) and np.all(d2 > 0):
        l1, l2 = np.log(d1), np.log(d2)
        return lambda t: np.interp(t, times, l1) - np.interp(t, times, l2)
    return lambda t: np.interp(t, times, d1) - np.interp(t, times, d2)


def detect_crossing(traj1: Trajectory, traj2: Trajectory) -> CrossingReport:
    """
    First strict overtaking of D1 by D2 -> D1 < D2.

    Only counts as a Mpemba crossing when trajectory 1 starts farther from
    equilibrium and stays closer on the sampled tail; touching without
    changing sign is not a crossing.
    """
    if traj1.distances is None or traj2.distances is None:
        raise DomainError("both trajectories need distances")
    if traj1.times.shape != traj2.times.shape or not np.array_equal(traj1.times, traj2.times):
        raise DomainError("trajectories must share the same time grid")

    times = traj1.times
    diff = traj1.distances - traj2.distances
    ordering = int(np.sign(diff[0]))

    last_positive = None
    bracket_index = None
    for k, value in enumerate(diff):
        if value > 0:
            last_positive = k
        elif value < 0 and last_positive is not None:
            bracket_index = (last_positive, k)
            break

    if bracket_index is None or ordering <= 0:
        return CrossingReport(crossed=False, t_cross=None, bracket=None, ordering_at_zero=ordering)

    lo, hi = bracket_index
    window = slice(lo, hi + 1)
    f = _interpolated_difference(times[window], traj1.distances[window], traj2.distances[window])
    step = float(np.min(np.diff(times)))
    t_cross = float(bisect(f, times[lo], times[hi], xtol=step / 1e3))

    crossed = bool(diff[-1] < 0)
    if not crossed:
        logger.info(f"Curves cross at t={t_cross:.6g} but the ordering is not kept on the tail")
    return CrossingReport(
        crossed=crossed,
        t_cross=t_cross,
        bracket=(float(times[lo]), float(times[hi])),
        ordering_at_zero=ordering
    )


def late_time_slope(trajectory: Trajectory, threshold: float = 1e-2, floor: float = 1e-300) -> float:
    """Least-squares slope of ln D(t) over samples with floor < D < threshold."""
    if trajectory.distances is None:
        raise DomainError("trajectory has no distances")
    d = trajectory.distances
    mask = (d < threshold) & (d > floor)
    if np.count_nonzero(mask) < 2:
        raise DomainError(f"fewer than two samples with {floor} < D < {threshold}")
    slope, _ = np.polyfit(trajectory.times[mask], np.log(d[mask]), 1)
    return float(slope)


def _sweep_point(gamma: float, alpha: float, omega0: float, omega: float) -> SweepRow:
    spec = PseudomodeSpec.single(omega0=omega0, alpha=alpha, omega=omega, gamma=gamma)
    p, roots = spectrum_of(spec)
    return SweepRow(
        gamma=float(gamma),
        alpha=float(alpha),
        gap=spectral_gap(roots),
        gap_markovian=markovian_reduction(spec).gap,
        is_lep=detect_lep(p, roots).is_lep
    )


def gap_sweep(
    gammas: Sequence[float],
    alphas: Sequence[float],
    omega0: float = 1.0,
    omega: Optional[float] = None,
    threads: int = 1
) -> List[SweepRow]:
    """Spectral gap and LEP flag over a (gamma, alpha) grid, gamma outer and alpha inner."""
    omega = omega0 if omega is None else omega
    points = [(g, a) for g in gammas for a in alphas]
    if any(g <= 0 or a < 0 for g, a in points):
        raise DomainError("sweep needs gamma > 0 and alpha >= 0")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda ga: _sweep_point(ga[0], ga[1], omega0, omega), points))

    logger.info(f"Gap sweep over {len(rows)} points, {sum(r.is_lep for r in rows)} flagged as LEP")
    return rows
