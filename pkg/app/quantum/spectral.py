"""
Single-excitation spectral analysis.

The dynamical matrix M acts on the amplitude vector (<a_0>, <a_1>, ..., <a_N>);
its characteristic polynomial det(lambda I - M) is Q(lambda). Every Liouvillian
eigenvalue is an integer combination of the roots of Q, so gaps and exceptional
points follow from an (N+1)-dimensional problem instead of the M^2-dimensional one.
"""

import itertools
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import bisect, minimize_scalar

from app.core.config import get_settings
from app.core.exceptions import DomainError, GapUndefinedError, NumericError
from app.core.logging import get_logger
from app.quantum.bath import PseudomodeSpec

logger = get_logger("quantum.spectral")

RESIDUAL_TOLERANCE = 1e-10
COALESCENCE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class DynamicalMatrix:
    """(N+1)x(N+1) arrow matrix; index 0 is the system mode."""

    entries: np.ndarray

    @property
    def dimension(self) -> int:
        """N + 1."""
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of M, sorted."""
        return sort_roots(linalg.eigvals(self.entries))


@dataclass(frozen=True)
class PolynomialCoefficients:
    """Monic Q(lambda), coefficients ordered from the highest power down."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        """Polynomial degree N + 1."""
        return len(self.coeffs) - 1

    @property
    def scale(self) -> float:
        """Largest coefficient magnitude, at least 1."""
        return float(np.max(np.abs(self.coeffs)))

    def __call__(self, lam):
        return np.polyval(self.coeffs, lam)

    def derivative(self) -> "PolynomialCoefficients":
        """Coefficients of dQ/dlambda."""
        return PolynomialCoefficients(np.polyder(self.coeffs))


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    multiplicity_tolerance: float = COALESCENCE_TOLERANCE
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.roots)

    def __iter__(self) -> Iterator[complex]:
        return iter(self.roots)


@dataclass(frozen=True)
class LepReport:
    is_lep: bool
    coalescing_pairs: List[Tuple[int, int]]
    derivative_residuals: np.ndarray
    min_separation: float


@dataclass(frozen=True)
class LepLocation:
    parameter: str
    mode: int
    found: bool
    value: Optional[float]
    residual: Optional[float]
    method: str


def sort_roots(roots: Sequence[complex]) -> np.ndarray:
    """Ascending decay rate -Re, ties broken by ascending Im."""
    values = np.asarray(roots, dtype=complex)
    order = sorted(range(len(values)), key=lambda k: (round(-values[k].real, 10), values[k].imag))
    return values[order]


def build_dynamical_matrix(spec: PseudomodeSpec) -> DynamicalMatrix:
    """Arrow matrix M for the given bath."""
    n = spec.n_modes + 1
    entries = np.zeros((n, n), dtype=complex)
    entries[0, 0] = -1j * spec.omega0
    for j, mode in enumerate(spec.modes, start=1):
        entries[j, j] = -1j * mode.omega - 0.5 * mode.gamma
        entries[0, j] = entries[j, 0] = -1j * mode.alpha
    return DynamicalMatrix(entries)


def characteristic_polynomial(spec: PseudomodeSpec) -> PolynomialCoefficients:
    """
    Q(l) = (i w0 + l) prod_i (i W_i + g_i/2 + l)
           + sum_i a_i^2 prod_{i' != i} (i W_i' + g_i'/2 + l)
    """
    factors = [np.array([1.0, 1j * m.omega + 0.5 * m.gamma]) for m in spec.modes]

    def product(polys) -> np.ndarray:
        out = np.array([1.0 + 0j])
        for poly in polys:
            out = np.polymul(out, poly)
        return out

    q = np.polymul(np.array([1.0, 1j * spec.omega0]), product(factors))
    for i, mode in enumerate(spec.modes):
        others = product(f for k, f in enumerate(factors) if k != i)
        q = np.polyadd(q, mode.alpha ** 2 * others)
    return PolynomialCoefficients(np.asarray(q, dtype=complex))


def _newton_polish(p: PolynomialCoefficients, root: complex) -> complex:
    dp = np.polyder(p.coeffs)
    slope = np.polyval(dp, root)
    if abs(slope) < np.finfo(float).eps * p.scale:
        return root
    candidate = root - np.polyval(p.coeffs, root) / slope
    if abs(np.polyval(p.coeffs, candidate)) <= abs(np.polyval(p.coeffs, root)):
        return candidate
    return root


def _critical_point(p: PolynomialCoefficients, start: complex, max_iter: int = 50) -> complex:
    """Newton iteration on Q' starting near a coalescing pair."""
    d1 = np.polyder(p.coeffs)
    d2 = np.polyder(d1)
    point = start
    for _ in range(max_iter):
        curvature = np.polyval(d2, point)
        if curvature == 0:
            break
        step = np.polyval(d1, point) / curvature
        point -= step
        if abs(step) <= np.finfo(float).eps * max(1.0, abs(point)):
            break
    return point


def polynomial_roots(p: PolynomialCoefficients) -> RootSet:
    """
    Roots of a monic polynomial from the companion-matrix eigenvalues, one
    Newton step per root, and snapping of coalescing pairs onto the double
    root (the nearby critical point of Q).
    """
    if p.degree < 1:
        raise DomainError("polynomial must have degree >= 1")
    if p.coeffs[0] != 1:
        raise DomainError("polynomial must be monic")

    if p.degree == 1:
        roots = np.array([-p.coeffs[1]], dtype=complex)
    else:
        roots = linalg.eigvals(linalg.companion(p.coeffs))
        roots = np.array([_newton_polish(p, r) for r in roots], dtype=complex)

    bound = RESIDUAL_TOLERANCE * p.scale
    for j, k in itertools.combinations(range(len(roots)), 2):
        if abs(roots[j] - roots[k]) < COALESCENCE_TOLERANCE * max(1.0, abs(roots[j])):
            merged = _critical_point(p, 0.5 * (roots[j] + roots[k]))
            if abs(p(merged)) <= bound:
                roots[j] = roots[k] = merged

    residuals = np.abs(p(roots))
    if np.any(residuals >= bound):
        raise NumericError(
            f"root finder did not converge: max residual {residuals.max():.3e} >= {bound:.3e}",
            residuals=residuals
        )

    order = sort_roots(roots)
    logger.debug(f"Q of degree {p.degree}: max residual {residuals.max():.3e}")
    return RootSet(roots=order, residuals=np.abs(p(order)))


def closed_form_roots_n1(omega0: float, omega: float, gamma: float, alpha: float) -> RootSet:
    """
    Quadratic roots for a single pseudomode.

    On resonance these are -gamma/4 +- sqrt(gamma^2 - 16 alpha^2)/4 - i omega0;
    off resonance the quadratic formula is applied to Q directly.
    """
    if omega == omega0:
        radical = np.sqrt(complex(gamma ** 2 - 16.0 * alpha ** 2))
        base = -0.25 * gamma - 1j * omega0
        roots = [base + 0.25 * radical, base - 0.25 * radical]
    else:
        b = 1j * (omega0 + omega) + 0.5 * gamma
        c = 1j * omega0 * (1j * omega + 0.5 * gamma) + alpha ** 2
        radical = np.sqrt(b * b - 4.0 * c)
        roots = [0.5 * (-b + radical), 0.5 * (-b - radical)]

    p = characteristic_polynomial(PseudomodeSpec.single(omega0, alpha, omega, gamma))
    ordered = sort_roots(roots)
    return RootSet(roots=ordered, residuals=np.abs(p(ordered)))


def detect_lep(
    p: PolynomialCoefficients,
    roots: RootSet,
    tol: Optional[float] = None
) -> LepReport:
    """
    Flag a Liouvillian exceptional point: a root where dQ/dlambda vanishes
    (below tol * coefficient scale) with a partner closer than sqrt(tol).
    """
    tol = get_settings().lep_tolerance if tol is None else tol
    values = roots.roots
    derivative = np.abs(np.polyval(np.polyder(p.coeffs), values))
    distance_tol = np.sqrt(tol)

    pairs = []
    min_separation = np.inf
    for j, k in itertools.combinations(range(len(values)), 2):
        gap = abs(values[j] - values[k])
        min_separation = min(min_separation, gap)
        if gap < distance_tol * max(1.0, abs(values[j])):
            pairs.append((j, k))

    flat = derivative < tol * p.scale
    is_lep = any(flat[j] or flat[k] for j, k in pairs)
    return LepReport(
        is_lep=bool(is_lep),
        coalescing_pairs=pairs,
        derivative_residuals=derivative,
        min_separation=float(min_separation)
    )


def liouvillian_eigenvalue(roots: RootSet, index: Sequence[int]) -> complex:
    """
    Combination eigenvalue for the index (m_0, n_0, ..., m_N, n_N):
    sum_j i Im(r_j)(m_j - n_j) + Re(r_j)(m_j + n_j).
    """
    index = list(index)
    if len(index) != 2 * len(roots):
        raise DomainError(f"index must have {2 * len(roots)} entries, got {len(index)}")
    if any(int(k) != k or k < 0 for k in index):
        raise DomainError(f"index entries must be nonnegative integers: {index}")

    value = 0j
    for j, root in enumerate(roots.roots):
        m, n = index[2 * j], index[2 * j + 1]
        value += 1j * root.imag * (m - n) + root.real * (m + n)
    return complex(value)


def index_vectors(width: int, excitation_cap: int) -> Iterator[Tuple[int, ...]]:
    """Nonnegative integer vectors of length `width` with entry sum <= excitation_cap."""
    if excitation_cap < 0:
        raise DomainError("excitation cap must be nonnegative")
    for total in range(excitation_cap + 1):
        for slots in itertools.combinations_with_replacement(range(width), total):
            index = [0] * width
            for slot in slots:
                index[slot] += 1
            yield tuple(index)


def combination_spectrum(roots: RootSet, excitation_cap: int) -> List[Tuple[complex, Tuple[int, ...]]]:
    """All combination eigenvalues with sum(m_j + n_j) <= excitation_cap."""
    entries = [
        (liouvillian_eigenvalue(roots, index), index)
        for index in index_vectors(2 * len(roots), excitation_cap)
    ]
    entries.sort(key=lambda e: (round(-e[0].real, 10), e[0].imag, e[1]))
    return entries


def spectral_gap(roots: RootSet) -> float:
    """Smallest decay rate -Re(r_j) over the decaying roots."""
    rates = [-r.real for r in roots.roots if -r.real > 1e-12 * max(1.0, abs(r))]
    if not rates:
        raise GapUndefinedError("all roots lie on the imaginary axis; no spectral gap")
    return float(min(rates))


def spectrum_of(spec: PseudomodeSpec) -> Tuple[PolynomialCoefficients, RootSet]:
    """Characteristic polynomial and its roots."""
    p = characteristic_polynomial(spec)
    return p, polynomial_roots(p)


def locate_lep(
    spec: PseudomodeSpec,
    parameter: str,
    lower: float,
    upper: float,
    mode: int = 0
) -> LepLocation:
    """
    Locate an exceptional point on the line where one mode parameter varies.

    A single mode is bisected on the sign of Re(discriminant). Several modes
    minimize the smallest pairwise root distance, then accept the point only if
    a Newton step on the squared split lands on an actual coalescence.
    """
    if parameter not in ("gamma", "alpha", "omega"):
        raise DomainError(f"unknown scan parameter '{parameter}'")
    if not lower < upper:
        raise DomainError(f"empty scan interval [{lower}, {upper}]")

    def spec_at(x: float) -> PseudomodeSpec:
        return spec.with_mode(mode, **{parameter: x})

    if spec.n_modes == 1:
        def discriminant(x: float) -> complex:
            _, b, c = characteristic_polynomial(spec_at(x)).coeffs
            return b * b - 4.0 * c

        lo, hi = discriminant(lower).real, discriminant(upper).real
        if lo * hi > 0:
            logger.info(f"No discriminant sign change for {parameter} in [{lower}, {upper}]")
            return LepLocation(parameter, mode, False, None, None, "bisection")

        value = bisect(lambda x: discriminant(x).real, lower, upper, xtol=1e-12, maxiter=200)
        disc = discriminant(value)
        scale = max(1.0, float(np.max(np.abs(characteristic_polynomial(spec_at(value)).coeffs))))
        found = abs(disc.imag) <= 1e-9 * scale
        if not found:
            logger.info(f"Re(disc) vanishes at {parameter}={value} but Im(disc)={disc.imag:.3e}")
        return LepLocation(parameter, mode, found, float(value), float(abs(disc)), "bisection")

    def min_gap(x: float) -> float:
        roots = polynomial_roots(characteristic_polynomial(spec_at(x))).roots
        return min(abs(a - b) for a, b in itertools.combinations(roots, 2))

    def pair_split(x: float, centre: complex) -> complex:
        """Squared split of the two roots nearest `centre`; analytic in x through the coalescence."""
        roots = polynomial_roots(characteristic_polynomial(spec_at(x))).roots
        a, b = sorted(roots, key=lambda r: abs(r - centre))[:2]
        return (a - b) ** 2

    result = minimize_scalar(min_gap, bounds=(lower, upper), method="bounded", options={"xatol": 1e-10})
    x0 = float(result.x)
    roots0 = polynomial_roots(characteristic_polynomial(spec_at(x0))).roots
    a, b = min(itertools.combinations(roots0, 2), key=lambda pair: abs(pair[0] - pair[1]))
    centre = 0.5 * (a + b)
    residual = float(abs(a - b))

    # A true crossing makes the squared split vanish on the real line; an avoided
    # one puts its zero at complex x, which Newton steps on the split expose.
    x, split = x0, residual
    for _ in range(4):
        h = 1e-6 * max(1.0, abs(x))
        x_lo, x_hi = max(lower, x - h), min(upper, x + h)
        slope = (pair_split(x_hi, centre) - pair_split(x_lo, centre)) / (x_hi - x_lo)
        if slope == 0:
            break
        x = float(np.clip((x - pair_split(x, centre) / slope).real, lower, upper))
        p1 = characteristic_polynomial(spec_at(x))
        roots1 = polynomial_roots(p1)
        a1, b1 = sorted(roots1.roots, key=lambda r: abs(r - centre))[:2]
        split = float(abs(a1 - b1))
        if detect_lep(p1, roots1).is_lep or split < COALESCENCE_TOLERANCE * max(1.0, abs(0.5 * (a1 + b1))):
            return LepLocation(parameter, mode, True, x, split, "min-gap")

    logger.info(f"Closest approach at {parameter}={x0} leaves the roots {min(residual, split):.3e} apart")
    return LepLocation(parameter, mode, False, None, min(residual, split), "min-gap")
