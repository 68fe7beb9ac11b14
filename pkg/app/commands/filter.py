"""
`filter`: solve the Zakai equation along a simulated or replayed observation
path and write the streams, density snapshots and trajectory manifest.
"""

import logging
from pathlib import Path

import click

from app.commands.common import Scenario, exit_codes, load, map_seeds, resolve_seeds, scenario_options
from app.commands.simulate import path_file, run_simulate
from app.errors import ConfigError, NumericalError
from app.models import FilterTrajectory, PathSample
from app.schemas.reports import FailureReport
from app.services.artifacts import read_path_binary, write_json, write_trajectory
from app.services.zakai import solve_zakai

# Configure logging
logger = logging.getLogger(__name__)


def obtain_path(scenario: Scenario, seed: int, replay: Path | None = None) -> PathSample:
    """Replay file if given or already on disk, otherwise simulate (and write) inline."""
    source = replay or path_file(scenario.out_dir, seed)
    if source.exists():
        path = read_path_binary(source)
        if path.d != scenario.spec.d or path.z.shape[1] != scenario.spec.d1:
            raise ConfigError(f"Path {source} does not match the scenario dimensions")
        if abs(path.dt - scenario.dt) > 1e-12 * scenario.dt:
            raise ConfigError(f"Path {source} has dt={path.dt}, scenario has time.dt={scenario.dt}")
        logger.info(f"[CLI] Replaying path from {source}")
        return path
    if replay is not None:
        raise FileNotFoundError(f"No path replay file {replay}")
    return run_simulate(scenario, seed)


def run_filter(
    scenario: Scenario,
    seed: int,
    snapshot_every: int | None = None,
    replay: Path | None = None,
) -> FilterTrajectory:
    path = obtain_path(scenario, seed, replay)
    run = scenario.config.run
    try:
        traj = solve_zakai(
            scenario.spec,
            path,
            scenario.grid,
            snapshot_every=snapshot_every or run.snapshot_every,
        )
    except NumericalError as e:
        scenario.out_dir.mkdir(parents=True, exist_ok=True)
        failure = FailureReport(
            seed=seed,
            scenario=scenario.spec.name,
            error=type(e).__name__,
            message=str(e),
            grid_nodes=list(scenario.grid.nodes),
            dt=scenario.dt,
        )
        write_json(failure, scenario.out_dir / f"failure_seed{seed}.json")
        raise
    write_trajectory(traj, scenario.out_dir, seed, scenario.spec.name, run.snapshot_format)
    return traj


@click.command("filter")
@scenario_options
@click.option("--snapshot-every", type=click.IntRange(min=1), default=None, help="Snapshot cadence in steps.")
@click.option(
    "--path",
    "replay",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Binary path replay file to filter (single seed).",
)
@exit_codes
def filter_command(
    config_file: Path,
    seed: int | None,
    out: Path | None,
    snapshot_every: int | None,
    replay: Path | None,
) -> None:
    """Solve the Zakai equation for each seed."""
    scenario = load(config_file, out)
    seeds = resolve_seeds(scenario, seed)
    if replay is not None and len(seeds) != 1:
        raise ConfigError("--path needs a single --seed")
    map_seeds(lambda s: run_filter(scenario, s, snapshot_every, replay), seeds)
