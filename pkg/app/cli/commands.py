"""
Analysis commands: spectrum, lep, evolve, mpemba, sweep.

Each command reads a RunConfig, writes its CSV artifacts into the output
directory and returns the lines of a human-readable summary.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.cli.csv_output import write_csv
from app.cli.run_config import InitialState, RunConfig
from app.core.exceptions import ConfigError, DomainError, GapUndefinedError
from app.core.logging import get_logger
from app.quantum.bath import PseudomodeSpec
from app.quantum.dynamics import (
    Trajectory,
    analytic_trajectory,
    coherent_cutoff,
    coherent_state,
    evolve_markovian,
    evolve_master_equation,
    initial_state,
    markovian_eigenvalues,
    markovian_reduction,
)
from app.quantum.liouvillian import build_liouvillian, full_spectrum
from app.quantum.mpemba import DistanceKind, attach_distances, detect_crossing, gap_sweep, late_time_slope
from app.quantum.spectral import (
    combination_spectrum,
    detect_lep,
    index_vectors,
    locate_lep,
    spectral_gap,
    spectrum_of,
)

logger = get_logger("cli.commands")


@dataclass(frozen=True)
class CommandOptions:
    out_dir: Path
    distance: Optional[DistanceKind] = None
    markovian: bool = False
    lamb_shift: bool = False
    threads: int = 1


def _gap_or_nan(roots) -> float:
    try:
        return spectral_gap(roots)
    except GapUndefinedError:
        return float("nan")


def _distance_kind(options: CommandOptions, states: Sequence[InitialState]) -> DistanceKind:
    """Explicit choice first; otherwise closed form for coherent inputs, HS/2 for density files."""
    if options.distance is not None:
        return options.distance
    if all(state.xi is not None for state in states):
        return DistanceKind.CLOSED_FORM
    return DistanceKind.HILBERT_SCHMIDT_HALF


def cmd_spectrum(config: RunConfig, options: CommandOptions) -> List[str]:
    """Roots of Q(lambda), combination and Markovian spectra, LEP flag."""
    spec = config.pseudomode_spec()
    p, roots = spectrum_of(spec)
    report = detect_lep(p, roots)
    red = markovian_reduction(spec)
    cap = config.spectrum.excitation_cap
    gap = _gap_or_nan(roots)

    write_csv(
        options.out_dir / "spectrum_roots.csv",
        ["index", "re", "im"],
        [(j, r.real, r.imag) for j, r in enumerate(roots.roots)]
    )
    write_csv(
        options.out_dir / "spectrum_combinations.csv",
        ["index_vector", "re", "im"],
        [(index, value.real, value.imag) for value, index in combination_spectrum(roots, cap)]
    )
    write_csv(
        options.out_dir / "spectrum_markovian.csv",
        ["index_vector", "re", "im"],
        [(index, v.real, v.imag) for index in index_vectors(4, cap)
         for v in [markovian_eigenvalues(red, index)]]
    )

    if config.sweep is not None:
        rows = []
        for gamma in config.sweep.gammas():
            for alpha in config.sweep.alphas():
                point = spec.with_mode(0, gamma=gamma, alpha=alpha)
                _, slice_roots = spectrum_of(point)
                markov_rate = markovian_reduction(point).gap
                rows.extend((gamma, alpha, j, r.real, r.imag, -markov_rate)
                            for j, r in enumerate(slice_roots.roots))
        write_csv(
            options.out_dir / "spectrum_slice.csv",
            ["gamma", "alpha", "root", "re", "im", "re_markovian"],
            rows
        )

    if config.spectrum.brute_force:
        if config.truncation is None:
            raise ConfigError("brute_force spectrum needs a [truncation] section")
        brute = full_spectrum(build_liouvillian(spec, config.truncation))
        write_csv(
            options.out_dir / "spectrum_bruteforce.csv",
            ["rank", "re", "im"],
            [(k, v.real, v.imag) for k, v in enumerate(brute.eigenvalues)]
        )

    return [
        "command: spectrum",
        *(f"root {j}: re={r.real!r} im={r.imag!r}" for j, r in enumerate(roots.roots)),
        f"gap: {gap!r}",
        f"gap_markovian: {red.gap!r}",
        f"gamma_markovian: {red.gamma_m!r}",
        f"lamb_shift: {red.lamb_shift!r}",
        f"is_lep: {report.is_lep}",
        f"min_root_separation: {report.min_separation!r}",
    ]


def cmd_lep(config: RunConfig, options: CommandOptions) -> List[str]:
    """Locate the LEP along the configured scan line."""
    if config.lep is None:
        raise ConfigError("the lep command needs a [lep] section")
    scan = config.lep
    spec = config.pseudomode_spec()
    location = locate_lep(spec, scan.parameter, scan.lower, scan.upper, mode=scan.mode - 1)

    lines = ["command: lep", f"scan: {scan.parameter} in [{scan.lower!r}, {scan.upper!r}] (mode {scan.mode})"]
    if location.found:
        logger.info(f"LEP located at {scan.parameter}={location.value!r}")
        at_point = spec.with_mode(scan.mode - 1, **{scan.parameter: location.value})
        mode = at_point.modes[scan.mode - 1]
        lines += [
            "found: True",
            f"value: {location.value!r}",
            f"gamma_over_alpha: {mode.gamma / mode.alpha!r}" if mode.alpha > 0 else "gamma_over_alpha: inf",
            f"gap_at_lep: {_gap_or_nan(spectrum_of(at_point)[1])!r}",
        ]
    else:
        logger.info(f"No LEP on the {scan.parameter} scan line")
        lines.append("found: False")

    write_csv(
        options.out_dir / "lep.csv",
        ["parameter", "mode", "found", "value", "residual", "method"],
        [(location.parameter, scan.mode, location.found, location.value, location.residual, location.method)]
    )
    return lines


def _system_state(config: RunConfig, state: InitialState) -> np.ndarray:
    if config.truncation is None:
        raise ConfigError("numeric evolution needs a [truncation] section")
    n_sys = config.truncation.n_sys
    if state.xi is not None:
        return coherent_state(state.xi, n_sys)
    try:
        rho = np.load(state.rho_file)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read {state.rho_file}: {e}") from e
    if rho.shape != (n_sys, n_sys):
        raise DomainError(f"{state.rho_file} holds a {rho.shape} matrix, expected {n_sys}x{n_sys}")
    return rho


def _trajectory(
    config: RunConfig,
    state: InitialState,
    spec: PseudomodeSpec,
    options: CommandOptions,
    markovian: bool,
    distance: DistanceKind
) -> Trajectory:
    times = config.time_grid.times()
    if config.evolve.method == "analytic":
        if state.xi is None:
            raise ConfigError("analytic evolution needs a coherent amplitude xi; use method = numeric")
        trajectory = analytic_trajectory(spec, state.xi, times, markovian, options.lamb_shift)
    else:
        if markovian:
            trajectory = evolve_markovian(
                markovian_reduction(spec), _system_state(config, state), times, options.lamb_shift, xi=state.xi
            )
        else:
            rho_sp = initial_state(_system_state(config, state), config.truncation)
            trajectory = evolve_master_equation(
                build_liouvillian(spec, config.truncation), rho_sp, times, xi=state.xi
            )
        if state.xi is not None and config.truncation.n_sys < coherent_cutoff(state.xi):
            logger.warning(
                f"System cutoff {config.truncation.n_sys} is below {coherent_cutoff(state.xi)} "
                f"for xi={state.xi!r}; the coherent tail is truncated"
            )
            trajectory = replace(trajectory, leakage=True)
    return attach_distances(trajectory, distance)


def _propagator(trajectory: Trajectory) -> np.ndarray:
    return trajectory.propagator() if trajectory.xi else trajectory.mean_amplitude()


def cmd_evolve(config: RunConfig, options: CommandOptions) -> List[str]:
    """Relaxation of a single initial state, with an optional Markovian reference."""
    if config.time_grid is None:
        raise ConfigError("the evolve command needs a [time] section")
    if len(config.states) != 1:
        raise ConfigError(f"the evolve command takes exactly one [state.1], got {len(config.states)}")
    state = config.states[0]
    spec = config.state_spec(state)
    distance = _distance_kind(options, config.states)

    trajectory = _trajectory(config, state, spec, options, False, distance)
    P = _propagator(trajectory)
    header = ["t", "re_P", "im_P", "abs_P", "distance", "leakage"]
    columns = [trajectory.times, P.real, P.imag, np.abs(P), trajectory.distances,
               [trajectory.leakage] * len(P)]

    if options.markovian:
        reference = _trajectory(config, state, spec, options, True, distance)
        P_M = _propagator(reference)
        header += ["re_P_M", "im_P_M", "abs_P_M", "distance_M"]
        columns += [P_M.real, P_M.imag, np.abs(P_M), reference.distances]

    write_csv(options.out_dir / "trajectory.csv", header, zip(*columns))

    lines = ["command: evolve", f"method: {config.evolve.method}", f"distance: {distance.value}",
             f"leakage: {trajectory.leakage}", f"final_distance: {float(trajectory.distances[-1])!r}"]
    _, roots = spectrum_of(spec)
    lines.append(f"gap: {_gap_or_nan(roots)!r}")
    try:
        lines.append(f"late_time_slope: {late_time_slope(trajectory)!r}")
    except DomainError:
        lines.append("late_time_slope: n/a")
    return lines


def cmd_mpemba(config: RunConfig, options: CommandOptions) -> List[str]:
    """Evolve two initial states and look for a crossing of their distances."""
    if config.time_grid is None:
        raise ConfigError("the mpemba command needs a [time] section")
    if len(config.states) != 2:
        raise ConfigError(f"the mpemba command takes exactly two initial states, got {len(config.states)}")
    first, second = config.states
    if first == second:
        logger.warning("Both initial states and generators are identical; the comparison is degenerate")
    distance = _distance_kind(options, config.states)

    def run(state: InitialState) -> Trajectory:
        return _trajectory(config, state, config.state_spec(state), options, options.markovian, distance)

    with ThreadPoolExecutor(max_workers=min(2, max(1, options.threads))) as pool:
        traj1, traj2 = pool.map(run, (first, second))

    report = detect_crossing(traj1, traj2)
    write_csv(
        options.out_dir / "mpemba.csv",
        ["t", "distance_1", "distance_2"],
        zip(traj1.times, traj1.distances, traj2.distances)
    )
    bracket = report.bracket or (None, None)
    write_csv(
        options.out_dir / "crossing.csv",
        ["crossed", "t_cross", "t_lo", "t_hi", "ordering_at_zero"],
        [(report.crossed, report.t_cross, bracket[0], bracket[1], report.ordering_at_zero)]
    )
    logger.info(f"Mpemba crossing: {report.crossed} (t_cross={report.t_cross})")

    return [
        "command: mpemba",
        f"markovian: {options.markovian}",
        f"distance: {distance.value}",
        f"initial_distance_1: {float(traj1.distances[0])!r}",
        f"initial_distance_2: {float(traj2.distances[0])!r}",
        f"crossed: {report.crossed}",
        f"t_cross: {report.t_cross!r}",
        f"ordering_at_zero: {report.ordering_at_zero}",
    ]


def cmd_sweep(config: RunConfig, options: CommandOptions) -> List[str]:
    """Spectral gap and LEP flag over the (gamma, alpha) grid."""
    if config.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] section")
    spec = config.pseudomode_spec()
    if spec.n_modes != 1:
        raise ConfigError("the (gamma, alpha) sweep is defined for a single pseudomode")

    rows = gap_sweep(
        config.sweep.gammas(),
        config.sweep.alphas(),
        omega0=spec.omega0,
        omega=spec.modes[0].omega,
        threads=options.threads
    )
    write_csv(
        options.out_dir / "sweep.csv",
        ["gamma", "alpha", "gap", "gap_markovian", "is_lep"],
        [(r.gamma, r.alpha, r.gap, r.gap_markovian, r.is_lep) for r in rows]
    )
    best = max(rows, key=lambda r: r.gap)
    return [
        "command: sweep",
        f"points: {len(rows)}",
        f"lep_points: {sum(r.is_lep for r in rows)}",
        f"max_gap: {best.gap!r} at gamma={best.gamma!r}, alpha={best.alpha!r}",
    ]


COMMANDS: Dict[str, Callable[[RunConfig, CommandOptions], List[str]]] = {
    "spectrum": cmd_spectrum,
    "lep": cmd_lep,
    "evolve": cmd_evolve,
    "mpemba": cmd_mpemba,
    "sweep": cmd_sweep,
}
