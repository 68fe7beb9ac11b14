"""
`simulate`: draw a path of the signal/observation system and write it as CSV
plus a binary replay file.
"""

import logging
from pathlib import Path

import click

from app.commands.common import Scenario, exit_codes, load, map_seeds, resolve_seeds, scenario_options
from app.services.artifacts import write_path_binary, write_path_csv
from app.services.sde_sim import simulate_system

# Configure logging
logger = logging.getLogger(__name__)


def path_file(out_dir: Path, seed: int) -> Path:
    return Path(out_dir) / f"path_seed{seed}.bin"


def run_simulate(scenario: Scenario, seed: int):
    path = simulate_system(scenario.spec, scenario.dt, seed)
    scenario.out_dir.mkdir(parents=True, exist_ok=True)
    write_path_csv(path, scenario.out_dir / f"path_seed{seed}.csv")
    write_path_binary(path, path_file(scenario.out_dir, seed))
    logger.info(f"[CLI] simulate: seed={seed} steps={path.steps} -> {scenario.out_dir}")
    return path


@click.command("simulate")
@scenario_options
@exit_codes
def simulate(config_file: Path, seed: int | None, out: Path | None) -> None:
    """Simulate (x, y) paths by Euler-Maruyama."""
    scenario = load(config_file, out)
    map_seeds(lambda s: run_simulate(scenario, s), resolve_seeds(scenario, seed))
