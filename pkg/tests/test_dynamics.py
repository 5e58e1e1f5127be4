import numpy as np
import pytest
from scipy import linalg

from app.core.exceptions import DomainError
from app.quantum.bath import Pseudomode, PseudomodeSpec
from app.quantum.dynamics import (
    Trajectory,
    analytic_P,
    analytic_trajectory,
    check_density_matrix,
    coherent_cutoff,
    coherent_state,
    evolve_amplitudes,
    evolve_markovian,
    evolve_master_equation,
    initial_state,
    markovian_P,
    markovian_eigenvalues,
    markovian_reduction,
)
from app.quantum.liouvillian import TruncationSpec, build_liouvillian
from app.quantum.spectral import build_dynamical_matrix


def hs_half(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * np.linalg.norm(a - b, "fro")


def test_coherent_state_is_normalized_and_pure():
    rho = coherent_state(1.5, 12)
    assert np.trace(rho) == pytest.approx(1.0)
    assert np.trace(rho @ rho).real == pytest.approx(1.0)
    n = np.arange(12)
    assert np.real(np.trace(np.diag(n) @ rho)) == pytest.approx(2.25, rel=1e-3)


def test_coherent_cutoff_bounds_the_tail():
    assert coherent_cutoff(0.0) == 2
    cutoff = coherent_cutoff(2.0)
    rho = coherent_state(2.0, 60)
    assert np.real(np.trace(rho[cutoff:, cutoff:])) < 1e-10
    assert np.real(np.trace(rho[cutoff - 1:, cutoff - 1:])) >= 1e-10


def test_coherent_cutoff_values():
    assert coherent_cutoff(1.0) == 13
    assert coherent_cutoff(0.5) == 9


@pytest.mark.parametrize("rho", [
    np.ones((2, 3)) / 2,
    np.array([[0.5, 0.5j], [0.5j, 0.5]]),
    np.diag([0.6, 0.6]),
    np.diag([1.2, -0.2]),
])
def test_check_density_matrix_rejects(rho):
    with pytest.raises(DomainError):
        check_density_matrix(rho)


def test_check_density_matrix_accepts_physical_states():
    np.testing.assert_allclose(check_density_matrix(coherent_state(1.0, 8)), coherent_state(1.0, 8))
    assert check_density_matrix(np.diag([1.0, 0.0])).dtype == complex


def test_initial_state_checks_shape(small_trunc):
    with pytest.raises(DomainError):
        initial_state(np.eye(2), small_trunc)
    rho = initial_state(coherent_state(0.5, 3), small_trunc)
    assert rho.shape == (9, 9)


def test_analytic_P_examples(lep_spec, overdamped_spec):
    assert analytic_P(lep_spec, 0.0) == pytest.approx(1.0)
    assert analytic_P(lep_spec, 1.0) == pytest.approx(3.5 * np.exp(-2.5) * np.exp(-1j))
    expected = np.exp(-1j - 2.5) * (np.cosh(0.7) + 2.5 / 0.7 * np.sinh(0.7))
    assert analytic_P(overdamped_spec, 1.0) == pytest.approx(expected)


def test_analytic_P_is_continuous_across_coalescence(lep_spec):
    t = np.linspace(0.0, 3.0, 31)
    near = analytic_P(lep_spec.with_mode(0, alpha=2.5 - 1e-9), t)
    np.testing.assert_allclose(near, analytic_P(lep_spec, t), atol=1e-7)


def test_analytic_P_matches_amplitude_propagation(underdamped_spec):
    t = np.linspace(0.0, 4.0, 9)
    trajectory = evolve_amplitudes(underdamped_spec, 1.0, t)
    np.testing.assert_allclose(trajectory.amplitudes, analytic_P(underdamped_spec, t), atol=1e-12)


def test_analytic_P_off_resonance_uses_matrix_exponential():
    spec = PseudomodeSpec(
        omega0=1.0,
        modes=(Pseudomode(alpha=0.7, omega=0.5, gamma=1.0), Pseudomode(alpha=0.3, omega=1.8, gamma=3.0))
    )
    times = np.array([0.0, 1.0, 5.0])
    values = analytic_P(spec, times)
    generator = build_dynamical_matrix(spec).entries
    expected = [linalg.expm(t * generator)[0, 0] for t in times]
    assert values == pytest.approx(expected, abs=1e-12)
    assert values[0] == pytest.approx(1.0)
    assert np.all(np.abs(values) <= 1.0 + 1e-12)


def test_analytic_P_rejects_negative_time(lep_spec):
    with pytest.raises(DomainError):
        analytic_P(lep_spec, -1.0)


def test_markovian_reduction_examples(lep_spec):
    assert markovian_reduction(lep_spec).gamma_m == pytest.approx(1.25)
    two = PseudomodeSpec(
        omega0=1.0,
        modes=(Pseudomode(alpha=1.0, omega=1.0, gamma=4.0), Pseudomode(alpha=1.0, omega=1.0, gamma=4.0))
    )
    assert markovian_reduction(two).gamma_m == pytest.approx(1.0)
    decoupled = PseudomodeSpec.single(omega0=1.0, alpha=0.0, omega=1.0, gamma=4.0)
    assert markovian_reduction(decoupled).gamma_m == 0.0
    assert markovian_reduction(lep_spec).gap == pytest.approx(0.625)


def test_markovian_P_examples(lep_spec):
    red = markovian_reduction(lep_spec)
    assert markovian_P(red, 0.0) == pytest.approx(1.0)
    assert markovian_P(red, 2.0) == pytest.approx(np.exp(-1.25) * np.exp(-2j))
    shifted = markovian_P(red, 2.0, include_lamb_shift=True)
    assert abs(shifted) == pytest.approx(abs(markovian_P(red, 2.0)))
    assert shifted == pytest.approx(np.exp(-1.25) * np.exp(-2j * (1.0 + red.lamb_shift)))


def test_markovian_eigenvalues(lep_spec):
    red = markovian_reduction(lep_spec)
    assert markovian_eigenvalues(red, (0, 0, 0, 0)) == 0
    assert markovian_eigenvalues(red, (0, 0, 1, 0)) == pytest.approx(-0.625)
    assert markovian_eigenvalues(red, (1, 0, 1, 0)) == pytest.approx(-0.625 - 1j)
    with pytest.raises(DomainError):
        markovian_eigenvalues(red, (1, 0, 1))


def test_broad_bath_limit_decays_at_twice_the_markovian_amplitude_rate():
    # the slow root tends to -2 alpha^2 / gamma = -gamma_M, while P_M decays at gamma_M / 2
    t = np.linspace(0.0, 4.0, 401)
    deviations = []
    for gamma in (50.0, 100.0, 500.0):
        spec = PseudomodeSpec.single(omega0=1.0, alpha=np.sqrt(1.25 * gamma / 2), omega=1.0, gamma=gamma)
        red = markovian_reduction(spec)
        assert red.gamma_m == pytest.approx(1.25)
        exact = analytic_P(spec, t)
        markov = markovian_P(red.model_copy(update={"gamma_m": 2 * red.gamma_m}), t)
        deviations.append(np.max(np.abs(exact - markov)))
    assert deviations[0] > deviations[1] > deviations[2]
    assert deviations[2] < 0.02


def test_analytic_trajectory_carries_amplitudes(lep_spec):
    t = np.linspace(0.0, 1.0, 11)
    trajectory = analytic_trajectory(lep_spec, 2.0, t)
    assert trajectory.representation == "amplitude"
    np.testing.assert_allclose(trajectory.propagator(), analytic_P(lep_spec, t))
    markov = analytic_trajectory(lep_spec, 2.0, t, markovian=True)
    np.testing.assert_allclose(markov.amplitudes, 2.0 * markovian_P(markovian_reduction(lep_spec), t))


def test_trajectory_rejects_unordered_times():
    with pytest.raises(DomainError):
        Trajectory(times=np.array([0.0, 1.0, 0.5]), representation="amplitude", amplitudes=np.zeros(3))
    with pytest.raises(DomainError):
        Trajectory(times=np.array([0.0, 1.0]), representation="wavefunction")


def test_vacuum_input_is_stationary(overdamped_spec, small_trunc):
    L = build_liouvillian(overdamped_spec, small_trunc)
    trajectory = evolve_master_equation(L, initial_state(coherent_state(0.0, 3), small_trunc),
                                        np.linspace(0.0, 2.0, 5), xi=0.0)
    for rho in trajectory.states:
        np.testing.assert_allclose(rho, coherent_state(0.0, 3), atol=1e-14)
    with pytest.raises(DomainError):
        trajectory.propagator()


def test_evolution_argument_checks(overdamped_spec, small_trunc):
    L = build_liouvillian(overdamped_spec, small_trunc)
    rho0 = initial_state(coherent_state(0.5, 3), small_trunc)
    with pytest.raises(DomainError):
        evolve_master_equation(L, np.eye(3), [0.0, 1.0])
    with pytest.raises(DomainError):
        evolve_master_equation(L, rho0, [0.0])
    with pytest.raises(DomainError):
        evolve_master_equation(L, rho0, [0.0, -1.0])
    with pytest.raises(DomainError):
        evolve_master_equation(L, rho0, [0.0, 1.0], method="euler")


def test_small_coherent_run_keeps_state_physical(lep_spec):
    trunc = TruncationSpec(n_sys=8, n_modes=(8,))
    L = build_liouvillian(lep_spec, trunc)
    times = np.linspace(0.0, 2.0, 41)
    trajectory = evolve_master_equation(L, initial_state(coherent_state(0.5, 8), trunc), times, xi=0.5)
    assert not trajectory.leakage
    assert trajectory.trace_drift() < 1e-9
    assert trajectory.hermiticity_error() < 1e-10
    np.testing.assert_allclose(trajectory.purity(), 1.0, atol=1e-6)
    np.testing.assert_allclose(trajectory.propagator(), analytic_P(lep_spec, times), atol=1e-6)


def test_expm_stepping_matches_runge_kutta(overdamped_spec):
    trunc = TruncationSpec(n_sys=4, n_modes=(4,))
    L = build_liouvillian(overdamped_spec, trunc)
    rho0 = initial_state(coherent_state(0.3, 4), trunc)
    times = np.linspace(0.0, 1.5, 7)
    rk = evolve_master_equation(L, rho0, times, method="rk")
    expm = evolve_master_equation(L, rho0, times, method="expm")
    np.testing.assert_allclose(rk.states, expm.states, atol=1e-8)


def test_small_cutoff_reports_leakage(lep_spec, caplog):
    trunc = TruncationSpec(n_sys=3, n_modes=(3,))
    L = build_liouvillian(lep_spec, trunc)
    trajectory = evolve_master_equation(L, initial_state(coherent_state(1.5, 3), trunc),
                                        np.linspace(0.0, 1.0, 5), xi=1.5)
    assert trajectory.leakage
    assert "leakage" in caplog.text


def test_markovian_generator_reproduces_closed_form(lep_spec):
    red = markovian_reduction(lep_spec)
    times = np.linspace(0.0, 3.0, 31)
    trajectory = evolve_markovian(red, coherent_state(0.5, 10), times, xi=0.5)
    np.testing.assert_allclose(trajectory.propagator(), markovian_P(red, times), atol=1e-6)


@pytest.mark.slow
def test_master_equation_matches_coherent_oracle(lep_spec):
    cutoff = 16
    assert coherent_cutoff(1.0) <= cutoff
    trunc = TruncationSpec(n_sys=cutoff, n_modes=(cutoff,))
    L = build_liouvillian(lep_spec, trunc)
    times = np.linspace(0.0, 5.0, 200)
    trajectory = evolve_master_equation(L, initial_state(coherent_state(1.0, cutoff), trunc), times, xi=1.0)

    P = analytic_P(lep_spec, times)
    for rho, amplitude in zip(trajectory.states, P):
        assert hs_half(rho, coherent_state(amplitude, cutoff)) < 1e-6

    assert not trajectory.leakage
    assert trajectory.trace_drift() < 1e-9
    assert trajectory.hermiticity_error() < 1e-10
    np.testing.assert_allclose(trajectory.purity(), 1.0, atol=1e-6)
