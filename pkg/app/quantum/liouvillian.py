"""
Truncated system + pseudomode Hilbert space, the extended Hamiltonian H_sp and
the vectorized Liouvillian superoperator.

Vectorization stacks columns (Fortran order), so that
    vec(A rho B) = (B^T kron A) vec(rho),
    -i[H, .]     -> -i (I kron H - H^T kron I),
    a . a^dag    -> conj(a) kron a.
The system mode is the first tensor factor, pseudomodes follow in order.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Annotated, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg, sparse
from scipy.sparse.linalg import eigs
from scipy.sparse.linalg import norm as sparse_norm

from app.core.config import get_settings
from app.core.exceptions import DimensionLimitError, DomainError, MultiplicityError, NumericError
from app.core.logging import get_logger
from app.quantum.bath import PseudomodeSpec

logger = get_logger("quantum.liouvillian")

DENSE_NULL_SPACE_LIMIT = 32


class TruncationSpec(BaseModel):
    """Fock cutoffs: states 0..n-1 are kept for every mode."""

    model_config = ConfigDict(frozen=True)

    n_sys: int = Field(..., ge=2)
    n_modes: Tuple[Annotated[int, Field(ge=2)], ...] = Field(..., min_length=1)

    @property
    def dims(self) -> Tuple[int, ...]:
        """Fock cutoffs, system first."""
        return (self.n_sys,) + tuple(self.n_modes)

    @property
    def dimension(self) -> int:
        """Hilbert-space dimension M."""
        return int(np.prod(self.dims))

    @property
    def pseudomode_dimension(self) -> int:
        """Dimension of the pseudomode factor."""
        return int(np.prod(self.n_modes))


@dataclass(frozen=True)
class LiouvillianOperator:
    matrix: sparse.csr_matrix
    trunc: Optional[TruncationSpec] = None
    spec: Optional[PseudomodeSpec] = None

    @property
    def dimension(self) -> int:
        """Hilbert-space dimension M; the superoperator is M^2 x M^2."""
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L acting on a density matrix."""
        return unvectorize(self.matrix @ vectorize(rho), self.dimension)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    gap: float
    right_eigenmatrices: Optional[List[np.ndarray]] = None
    left_eigenmatrices: Optional[List[np.ndarray]] = None


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stacked vec(rho)."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of vectorize."""
    return np.asarray(vec, dtype=complex).reshape((dim, dim), order="F")


def destroy(cutoff: int) -> sparse.csr_matrix:
    """Annihilation operator on `cutoff` levels."""
    return sparse.diags(np.sqrt(np.arange(1, cutoff, dtype=float)), 1, format="csr", dtype=complex)


def embed(op: sparse.spmatrix, position: int, dims: Sequence[int]) -> sparse.csr_matrix:
    """Tensor op into slot `position` of the product space with identities elsewhere."""
    factors = [op if k == position else sparse.identity(d, dtype=complex, format="csr")
               for k, d in enumerate(dims)]
    return reduce(lambda a, b: sparse.kron(a, b, format="csr"), factors)


def annihilators(trunc: TruncationSpec) -> List[sparse.csr_matrix]:
    """[a_0, a_1, ..., a_N] on the full truncated space."""
    dims = trunc.dims
    return [embed(destroy(d), k, dims) for k, d in enumerate(dims)]


def total_excitation(trunc: TruncationSpec) -> sparse.csr_matrix:
    """Number operator summed over the system and every pseudomode."""
    ops = annihilators(trunc)
    return reduce(lambda acc, a: acc + a.getH() @ a, ops[1:], ops[0].getH() @ ops[0])


def _check_dimension(spec: PseudomodeSpec, trunc: TruncationSpec) -> None:
    if len(trunc.n_modes) != spec.n_modes:
        raise DomainError(
            f"truncation lists {len(trunc.n_modes)} pseudomode cutoffs for {spec.n_modes} modes"
        )
    limit = get_settings().dense_dimension_limit
    if trunc.dimension > limit:
        raise DimensionLimitError(f"Hilbert-space dimension {trunc.dimension} exceeds limit {limit}")


def build_hamiltonian_sp(spec: PseudomodeSpec, trunc: TruncationSpec) -> sparse.csr_matrix:
    """H_sp = w0 a0^dag a0 + sum_i W_i a_i^dag a_i + sum_i alpha_i (a0 a_i^dag + a0^dag a_i)."""
    _check_dimension(spec, trunc)
    a = annihilators(trunc)
    a0 = a[0]
    hamiltonian = spec.omega0 * (a0.getH() @ a0)
    for mode, ai in zip(spec.modes, a[1:]):
        hamiltonian = hamiltonian + mode.omega * (ai.getH() @ ai)
        hamiltonian = hamiltonian + mode.alpha * (a0 @ ai.getH() + a0.getH() @ ai)
    return hamiltonian.tocsr()


def commutator_superoperator(hamiltonian: sparse.spmatrix) -> sparse.csr_matrix:
    """Superoperator of rho -> -i[H, rho]."""
    identity = sparse.identity(hamiltonian.shape[0], dtype=complex, format="csr")
    return (-1j * (sparse.kron(identity, hamiltonian) - sparse.kron(hamiltonian.T, identity))).tocsr()


def dissipator_superoperator(jump: sparse.spmatrix) -> sparse.csr_matrix:
    """D[a] = a . a^dag - 1/2 {a^dag a, .}."""
    identity = sparse.identity(jump.shape[0], dtype=complex, format="csr")
    number = jump.getH() @ jump
    return (
        sparse.kron(jump.conj(), jump)
        - 0.5 * (sparse.kron(identity, number) + sparse.kron(number.T, identity))
    ).tocsr()


def build_liouvillian(spec: PseudomodeSpec, trunc: TruncationSpec) -> LiouvillianOperator:
    """Sparse pseudomode Liouvillian on the truncated space."""
    hamiltonian = build_hamiltonian_sp(spec, trunc)
    matrix = commutator_superoperator(hamiltonian)
    for mode, ai in zip(spec.modes, annihilators(trunc)[1:]):
        matrix = matrix + mode.gamma * dissipator_superoperator(ai)
    logger.debug(f"Liouvillian assembled: M={trunc.dimension}, nnz={matrix.nnz}")
    return LiouvillianOperator(matrix=matrix.tocsr(), trunc=trunc, spec=spec)


def build_damped_oscillator_liouvillian(
    frequency: float,
    rate: float,
    n_sys: int
) -> LiouvillianOperator:
    """-i[w a^dag a, .] + rate D[a] on a single truncated oscillator."""
    a = destroy(n_sys)
    matrix = commutator_superoperator(frequency * (a.getH() @ a)) + rate * dissipator_superoperator(a)
    return LiouvillianOperator(matrix=matrix.tocsr())


def _ordering_key(value: complex) -> Tuple[float, float]:
    return (round(-value.real, 10), value.imag)


def full_spectrum(L: LiouvillianOperator, with_eigenmatrices: bool = False) -> SpectrumResult:
    """Dense eigendecomposition, eigenvalues sorted by ascending |Re|."""
    dim = L.dimension
    limit = get_settings().dense_eigen_limit
    if dim > limit:
        raise DimensionLimitError(
            f"dense spectrum needs M <= {limit} (got M={dim}); "
            "use the closed-form roots of the characteristic polynomial instead"
        )

    dense = L.matrix.toarray()
    if not with_eigenmatrices:
        values = linalg.eigvals(dense)
        order = sorted(range(len(values)), key=lambda k: _ordering_key(values[k]))
        values = values[order]
        return SpectrumResult(eigenvalues=values, gap=float(-values[1].real))

    values, right = linalg.eig(dense)
    order = sorted(range(len(values)), key=lambda k: _ordering_key(values[k]))
    values, right = values[order], right[:, order]

    # rows of V^-1 are the dual basis, so Tr[l_k^dag r_k'] = delta even inside degenerate eigenspaces
    left = linalg.inv(right).conj().T

    # steady state carries unit trace, its left partner is then the identity
    trace = np.trace(unvectorize(right[:, 0], dim))
    if abs(trace) > 1e-12:
        right[:, 0] /= trace
        left[:, 0] *= np.conj(trace)

    return SpectrumResult(
        eigenvalues=values,
        gap=float(-values[1].real),
        right_eigenmatrices=[unvectorize(right[:, k], dim) for k in range(len(values))],
        left_eigenmatrices=[unvectorize(left[:, k], dim) for k in range(len(values))]
    )


def reconstruct_state(spectrum: SpectrumResult, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = sum_l Tr[l_l^dag rho(0)] exp(lambda_l t) r_l."""
    if spectrum.right_eigenmatrices is None or spectrum.left_eigenmatrices is None:
        raise DomainError("spectrum was computed without eigenmatrices")
    rho = np.zeros_like(spectrum.right_eigenmatrices[0])
    for value, left, right in zip(spectrum.eigenvalues, spectrum.left_eigenmatrices,
                                  spectrum.right_eigenmatrices):
        rho += np.vdot(left, rho0) * np.exp(value * t) * right
    return rho


def _normalize_density(vec: np.ndarray, dim: int) -> np.ndarray:
    rho = unvectorize(vec, dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def steady_state(L: LiouvillianOperator, tol: float = 1e-10) -> np.ndarray:
    """
    Normalized null vector of L.

    Small spaces use a dense SVD; larger ones shift-invert ARPACK around zero.
    A degenerate null space raises MultiplicityError, a residual ||L rho|| above
    tol * ||L|| raises NumericError.
    """
    dim = L.dimension
    if dim <= DENSE_NULL_SPACE_LIMIT:
        dense = L.matrix.toarray()
        _, singular, vh = linalg.svd(dense)
        threshold = tol * max(1.0, singular[0])
        multiplicity = int(np.sum(singular < threshold))
        if multiplicity != 1:
            raise MultiplicityError(f"null space of L has dimension {multiplicity}", multiplicity)
        rho = _normalize_density(vh[-1].conj(), dim)
    else:
        values, vectors = eigs(L.matrix.tocsc(), k=2, sigma=1e-6, which="LM")
        order = np.argsort(np.abs(values))
        values, vectors = values[order], vectors[:, order]
        if abs(values[1]) < tol * max(1.0, abs(L.matrix).max()):
            raise MultiplicityError("null space of L is degenerate", int(np.sum(np.abs(values) < tol)))
        rho = _normalize_density(vectors[:, 0], dim)

    residual = float(np.linalg.norm(L.matrix @ vectorize(rho)))
    logger.debug(f"steady state residual {residual:.3e}")
    if residual > tol * max(1.0, float(sparse_norm(L.matrix))):
        raise NumericError(f"steady state residual {residual:.3e} exceeds tolerance", residuals=[residual])
    return rho


def partial_trace_pseudomodes(rho_sp: np.ndarray, trunc: TruncationSpec) -> np.ndarray:
    """Reduced system state Tr_p[rho_sp]."""
    rho_sp = np.asarray(rho_sp)
    dim = trunc.dimension
    if rho_sp.shape != (dim, dim):
        raise DomainError(f"expected a {dim}x{dim} density matrix, got shape {rho_sp.shape}")
    rest = trunc.pseudomode_dimension
    return np.einsum("ajbj->ab", rho_sp.reshape(trunc.n_sys, rest, trunc.n_sys, rest))
