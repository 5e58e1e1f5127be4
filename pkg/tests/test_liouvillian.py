import numpy as np
import pytest
from pydantic import ValidationError

from app.core.config import get_settings
from app.core.exceptions import DimensionLimitError, DomainError, MultiplicityError, NumericError
from app.quantum import liouvillian
from app.quantum.bath import PseudomodeSpec
from app.quantum.dynamics import coherent_state, evolve_master_equation, initial_state
from app.quantum.liouvillian import (
    TruncationSpec,
    build_hamiltonian_sp,
    build_liouvillian,
    commutator_superoperator,
    destroy,
    full_spectrum,
    partial_trace_pseudomodes,
    reconstruct_state,
    steady_state,
    total_excitation,
    unvectorize,
    vectorize,
)
from app.quantum.spectral import combination_spectrum, spectrum_of


def random_hermitian(dim: int, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return x + x.conj().T


def vacuum(dim: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def test_truncation_validation():
    assert TruncationSpec(n_sys=3, n_modes=(4, 5)).dimension == 60
    with pytest.raises(ValidationError):
        TruncationSpec(n_sys=1, n_modes=(3,))
    with pytest.raises(ValidationError):
        TruncationSpec(n_sys=3, n_modes=(1,))
    with pytest.raises(ValidationError):
        TruncationSpec(n_sys=3, n_modes=())


def test_vectorization_is_column_stacking():
    rho = np.arange(4).reshape(2, 2)
    np.testing.assert_array_equal(vectorize(rho), [0, 2, 1, 3])
    np.testing.assert_array_equal(unvectorize(vectorize(rho), 2), rho)


def test_destroy_lowers_fock_states():
    a = destroy(4).toarray()
    np.testing.assert_allclose(np.diag(a, 1), np.sqrt([1, 2, 3]))
    assert np.count_nonzero(a) == 3


def test_decoupled_hamiltonian_is_diagonal():
    spec = PseudomodeSpec.single(omega0=1.0, alpha=0.0, omega=2.0, gamma=1.0)
    trunc = TruncationSpec(n_sys=3, n_modes=(2,))
    H = build_hamiltonian_sp(spec, trunc).toarray()
    # basis |n0, n1> with n1 fastest
    expected = [n0 + 2.0 * n1 for n0 in range(3) for n1 in range(2)]
    np.testing.assert_allclose(H, np.diag(expected))


def test_two_level_hamiltonian_couples_single_excitations(lep_spec):
    H = build_hamiltonian_sp(lep_spec, TruncationSpec(n_sys=2, n_modes=(2,))).toarray()
    # |10> is index 2, |01> is index 1
    assert H[1, 2] == pytest.approx(2.5)
    assert H[2, 1] == pytest.approx(2.5)
    np.testing.assert_allclose(np.diag(H).real, [0.0, 1.0, 1.0, 2.0])


def test_hamiltonian_conserves_excitations_in_the_interior(overdamped_spec):
    trunc = TruncationSpec(n_sys=4, n_modes=(4,))
    H = build_hamiltonian_sp(overdamped_spec, trunc).toarray()
    N = total_excitation(trunc).toarray()
    commutator = H @ N - N @ H
    # only matrix elements touching a cutoff level can break the symmetry
    interior = [k for k in range(trunc.dimension) if k // 4 < 3 and k % 4 < 3]
    np.testing.assert_allclose(commutator[np.ix_(interior, interior)], 0.0, atol=1e-12)


def test_dimension_limit(overdamped_spec, monkeypatch):
    monkeypatch.setenv("PSEUDOMODE_DENSE_DIMENSION_LIMIT", "10")
    get_settings.cache_clear()
    with pytest.raises(DimensionLimitError):
        build_liouvillian(overdamped_spec, TruncationSpec(n_sys=4, n_modes=(4,)))


def test_cutoff_count_must_match_modes(overdamped_spec):
    with pytest.raises(DomainError):
        build_liouvillian(overdamped_spec, TruncationSpec(n_sys=3, n_modes=(3, 3)))


def test_liouvillian_preserves_trace(overdamped_spec, small_trunc):
    L = build_liouvillian(overdamped_spec, small_trunc)
    identity = vectorize(np.eye(small_trunc.dimension))
    np.testing.assert_allclose(L.matrix.conj().T @ identity, 0.0, atol=1e-12)
    rho = random_hermitian(small_trunc.dimension)
    assert abs(np.trace(L.apply(rho))) < 1e-12


def test_vacuum_is_annihilated(lep_spec, small_trunc):
    L = build_liouvillian(lep_spec, small_trunc)
    assert np.linalg.norm(L.apply(vacuum(small_trunc.dimension))) < 1e-14


def test_closed_system_spectrum_is_imaginary():
    spec = PseudomodeSpec.single(omega0=1.0, alpha=0.0, omega=2.0, gamma=1.0)
    trunc = TruncationSpec(n_sys=3, n_modes=(2,))
    values = np.linalg.eigvals(commutator_superoperator(build_hamiltonian_sp(spec, trunc)).toarray())
    np.testing.assert_allclose(values.real, 0.0, atol=1e-12)
    energies = [n0 + 2.0 * n1 for n0 in range(3) for n1 in range(2)]
    expected = sorted(round(f - e, 9) for e in energies for f in energies)
    assert sorted(np.round(values.imag, 9)) == expected


def test_full_spectrum_contains_double_root_at_lep(lep_spec, small_trunc):
    result = full_spectrum(build_liouvillian(lep_spec, small_trunc))
    assert result.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
    assert np.all(result.eigenvalues.real <= 1e-10)
    # defective eigenvalues are only resolved to about sqrt(machine epsilon)
    for target in (-2.5 - 1j, -2.5 + 1j):
        close = np.abs(result.eigenvalues - target) < 1e-6
        assert np.count_nonzero(close) >= 2


def test_full_spectrum_gap_matches_roots(overdamped_spec, small_trunc):
    result = full_spectrum(build_liouvillian(overdamped_spec, small_trunc))
    assert result.gap == pytest.approx(1.8, abs=1e-8)


@pytest.mark.parametrize("cutoff", [3, 4])
def test_low_lying_eigenvalues_are_exact_combinations(detuned_spec, cutoff):
    result = full_spectrum(build_liouvillian(detuned_spec, TruncationSpec(n_sys=cutoff, n_modes=(cutoff,))))
    _, roots = spectrum_of(detuned_spec)
    for value, index in combination_spectrum(roots, 2):
        assert np.min(np.abs(result.eigenvalues - value)) < 1e-8, index


def test_full_spectrum_dense_limit(overdamped_spec, monkeypatch):
    monkeypatch.setenv("PSEUDOMODE_DENSE_EIGEN_LIMIT", "8")
    get_settings.cache_clear()
    with pytest.raises(DimensionLimitError):
        full_spectrum(build_liouvillian(overdamped_spec, TruncationSpec(n_sys=3, n_modes=(3,))))


def test_eigenmatrices_are_biorthonormal(detuned_spec, small_trunc):
    result = full_spectrum(build_liouvillian(detuned_spec, small_trunc), with_eigenmatrices=True)
    left = np.array([l.reshape(-1, order="F") for l in result.left_eigenmatrices])
    right = np.array([r.reshape(-1, order="F") for r in result.right_eigenmatrices])
    np.testing.assert_allclose(left.conj() @ right.T, np.eye(len(result.eigenvalues)), atol=1e-8)
    assert np.trace(result.right_eigenmatrices[0]) == pytest.approx(1.0)


def test_reconstruction_matches_integration(detuned_spec, small_trunc):
    L = build_liouvillian(detuned_spec, small_trunc)
    result = full_spectrum(L, with_eigenmatrices=True)
    rho0 = initial_state(coherent_state(0.5, small_trunc.n_sys), small_trunc)
    times = np.linspace(0.0, 2.0, 5)
    trajectory = evolve_master_equation(L, rho0, times)
    for t, reduced in zip(times, trajectory.states):
        rebuilt = partial_trace_pseudomodes(reconstruct_state(result, rho0, t), small_trunc)
        np.testing.assert_allclose(rebuilt, reduced, atol=1e-6)


def test_reconstruction_needs_eigenmatrices(detuned_spec, small_trunc):
    result = full_spectrum(build_liouvillian(detuned_spec, small_trunc))
    with pytest.raises(DomainError):
        reconstruct_state(result, vacuum(small_trunc.dimension), 1.0)


def test_steady_state_is_vacuum(lep_spec, small_trunc):
    L = build_liouvillian(lep_spec, small_trunc)
    rho = steady_state(L)
    np.testing.assert_allclose(rho, vacuum(small_trunc.dimension), atol=1e-10)
    assert np.linalg.norm(L.matrix @ vectorize(rho)) < 1e-10


def test_steady_state_sparse_path(overdamped_spec):
    trunc = TruncationSpec(n_sys=6, n_modes=(6,))
    rho = steady_state(build_liouvillian(overdamped_spec, trunc))
    np.testing.assert_allclose(rho, vacuum(trunc.dimension), atol=1e-8)


def test_steady_state_rejects_a_large_residual(lep_spec, small_trunc, monkeypatch):
    L = build_liouvillian(lep_spec, small_trunc)
    monkeypatch.setattr(liouvillian, "_normalize_density", lambda vec, dim: np.eye(dim) / dim)
    with pytest.raises(NumericError) as excinfo:
        steady_state(L)
    assert excinfo.value.residuals[0] > 1e-3


def test_uncoupled_system_has_degenerate_steady_state(small_trunc):
    spec = PseudomodeSpec.single(omega0=1.0, alpha=0.0, omega=1.0, gamma=1.0)
    with pytest.raises(MultiplicityError) as excinfo:
        steady_state(build_liouvillian(spec, small_trunc))
    assert excinfo.value.multiplicity == 3


def test_partial_trace_of_product_state():
    trunc = TruncationSpec(n_sys=2, n_modes=(3,))
    rho_s = np.array([[0.7, 0.2j], [-0.2j, 0.3]])
    rho_p = np.diag([0.5, 0.3, 0.2]).astype(complex)
    np.testing.assert_allclose(partial_trace_pseudomodes(np.kron(rho_s, rho_p), trunc), rho_s)


def test_partial_trace_of_entangled_state():
    trunc = TruncationSpec(n_sys=2, n_modes=(2,))
    psi = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    np.testing.assert_allclose(partial_trace_pseudomodes(np.outer(psi, psi), trunc), np.eye(2) / 2)


def test_partial_trace_keeps_trace_and_checks_shape():
    trunc = TruncationSpec(n_sys=2, n_modes=(3,))
    rho = random_hermitian(6, seed=3)
    assert np.trace(partial_trace_pseudomodes(rho, trunc)) == pytest.approx(np.trace(rho))
    with pytest.raises(DomainError):
        partial_trace_pseudomodes(np.eye(4), trunc)
