"""
`compare`: a Zakai run against the Kalman-Bucy filter (linear-Gaussian
scenarios), the particle filter, optionally another stored Zakai run, and
the L1 sensitivity of the run to a shift of pi_0 (oracle.initial_shift).
"""

import logging
from pathlib import Path

import click
import numpy as np

from app.commands.common import Scenario, exit_codes, load, map_seeds, resolve_seeds, scenario_options
from app.commands.filter import obtain_path, run_filter
from app.errors import ConfigError, GridMismatch
from app.models import FilterState, FilterTrajectory, PathSample
from app.schemas.reports import (
    ComparisonReport,
    KalmanComparison,
    ParticleComparison,
    ReferenceComparison,
    StabilityComparison,
)
from app.services.artifacts import read_trajectory, write_json
from app.services.model import compute_psi
from app.services.oracles import density_distance, kalman_bucy, particle_filter
from app.services.scenario import linear_gaussian_from_config
from app.services.zakai import conditional_expectation, initial_stability

# Configure logging
logger = logging.getLogger(__name__)


def oracle_seed(seed: int) -> int:
    """Independent RNG stream for the particle filter, derived from the path seed."""
    child = np.random.SeedSequence(seed).spawn(1)[0]
    return int(child.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def zakai_moments(state: FilterState) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and coordinate variances of the normalized density."""
    points = state.grid.points
    mean = np.array([conditional_expectation(state, points[..., i]) for i in range(state.grid.d)])
    variance = np.array(
        [conditional_expectation(state, (points[..., i] - mean[i]) ** 2) for i in range(state.grid.d)]
    )
    return mean, variance


def _kalman(scenario: Scenario, path: PathSample, steps: list[int], means: np.ndarray, variances: np.ndarray):
    lin = linear_gaussian_from_config(scenario.config)
    kb_means, kb_covs = kalman_bucy(lin, path)
    kb_var = np.array([np.diag(kb_covs[k]) for k in steps])
    delta = means - kb_means[steps]
    return KalmanComparison(
        mean_delta=delta.tolist(),
        scaled_mean_delta=(delta / np.sqrt(kb_var)).tolist(),
        variance_rel_error=((variances - kb_var) / kb_var).tolist(),
    )


def _particles(
    scenario: Scenario,
    path: PathSample,
    traj: FilterTrajectory,
    n_particles: int,
    seed: int,
    means: np.ndarray,
) -> ParticleComparison:
    spec = scenario.spec
    steps = list(traj.snapshot_steps)
    every = int(np.gcd.reduce([k for k in steps if k > 0])) if len(steps) > 1 else traj.steps
    ensembles = particle_filter(spec, path, n_particles, oracle_seed(seed), record_every=every)
    by_step = {int(round(e.t / path.dt)): e for e in ensembles}
    selected = [by_step[k] for k in steps]

    final = selected[-1]
    t_final, y_final = path.times[-1], path.y[-1]
    z = np.concatenate([final.positions, np.broadcast_to(y_final, (final.size, spec.m))], axis=1)
    beta = np.asarray(spec.B(t_final, z), dtype=float) @ compute_psi(spec, t_final, y_final).T
    return ParticleComparison(
        particles=n_particles,
        l1_distance=[density_distance(s.normalized, e) for s, e in zip(traj.snapshots, selected)],
        mean_delta=(means - np.array([e.mean() for e in selected])).tolist(),
        p_beta_zakai=traj.p_beta[-1].tolist(),
        p_beta_particle=np.atleast_1d(final.expectation(beta)).tolist(),
    )


def _reference(traj: FilterTrajectory, reference_dir: Path, seed: int, means: np.ndarray) -> ReferenceComparison:
    other = read_trajectory(reference_dir, seed)
    if not other.grid.same_as(traj.grid):
        raise GridMismatch(f"Reference run in {reference_dir} uses a different grid")
    if tuple(other.snapshot_steps) != tuple(traj.snapshot_steps):
        raise ConfigError(f"Reference run in {reference_dir} has different snapshot steps")
    other_means = np.array([zakai_moments(s)[0] for s in other.snapshots])
    return ReferenceComparison(
        source=str(reference_dir),
        l1_distance=[density_distance(a.normalized, b.normalized) for a, b in zip(traj.snapshots, other.snapshots)],
        mean_delta=(means - other_means).tolist(),
    )


def _stability(scenario: Scenario, path: PathSample, shift: float) -> StabilityComparison:
    result = initial_stability(
        scenario.spec, path, scenario.grid, shift, snapshot_every=scenario.config.run.snapshot_every
    )
    return StabilityComparison(shift=shift, sensitivity=result.sensitivity, domination=result.domination)


def run_compare(
    scenario: Scenario,
    seed: int,
    n_particles: int | None = None,
    reference_dir: Path | None = None,
) -> ComparisonReport:
    out_dir = scenario.out_dir
    if (out_dir / f"trajectory_seed{seed}.json").exists():
        traj = read_trajectory(out_dir, seed)
    else:
        traj = run_filter(scenario, seed)
    if not traj.grid.same_as(scenario.grid):
        raise GridMismatch(f"Stored run for seed {seed} was computed on a different grid")
    path = obtain_path(scenario, seed)

    steps = list(traj.snapshot_steps)
    moments = [zakai_moments(state) for state in traj.snapshots]
    means = np.array([m for m, _ in moments])
    variances = np.array([v for _, v in moments])

    oracle = scenario.config.oracle
    n_particles = oracle.particles if n_particles is None else n_particles
    report = ComparisonReport(
        seed=seed,
        times=[float(path.times[k]) for k in steps],
        zakai_mean=means.tolist(),
        zakai_variance=variances.tolist(),
        kalman=_kalman(scenario, path, steps, means, variances) if oracle.kalman else None,
        particle=_particles(scenario, path, traj, n_particles, seed, means) if n_particles > 0 else None,
        reference=_reference(traj, reference_dir, seed, means) if reference_dir is not None else None,
        stability=_stability(scenario, path, oracle.initial_shift) if oracle.initial_shift > 0 else None,
    )
    write_json(report, out_dir / f"comparison_seed{seed}.json")
    logger.info(f"[CLI] compare: seed={seed} snapshots={len(steps)} -> {out_dir}")
    return report


@click.command("compare")
@scenario_options
@click.option("--particles", type=click.IntRange(min=0), default=None, help="Particle count (0 disables).")
@click.option(
    "--reference",
    "reference_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory of another filter run to compare against.",
)
@exit_codes
def compare_command(
    config_file: Path,
    seed: int | None,
    out: Path | None,
    particles: int | None,
    reference_dir: Path | None,
) -> None:
    """Compare Zakai runs with the Kalman-Bucy and particle oracles."""
    scenario = load(config_file, out)
    map_seeds(lambda s: run_compare(scenario, s, particles, reference_dir), resolve_seeds(scenario, seed))
