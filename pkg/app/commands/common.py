"""
Shared plumbing for the CLI commands: common options, scenario loading,
seed fan-out and the mapping from exceptions to exit codes.
"""

import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import click
from joblib import Parallel, delayed

from app.config import settings
from app.errors import AssumptionViolation, ConfigError, ZakaiError
from app.models import GridSpec, SystemSpec
from app.schemas.scenario import ScenarioConfig
from app.services.artifacts import write_json
from app.services.model import verify_assumptions
from app.services.scenario import build_grid, build_system_spec, load_scenario, scenario_box

# Configure logging
logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


@dataclass(frozen=True)
class Scenario:
    """A loaded scenario with its built system, grid and output directory."""

    config: ScenarioConfig
    spec: SystemSpec
    grid: GridSpec
    out_dir: Path

    @property
    def dt(self) -> float:
        return self.config.time.dt


def load(config_file: Path, out: Path | None) -> Scenario:
    """
    Read a scenario, build its system and grid, and check the standing
    assumptions over the scenario box. The check is written to
    assumptions.json in the output directory.

    Raises:
        AssumptionViolation: a sampled assumption fails
    """
    config = load_scenario(config_file)
    spec, grid = build_system_spec(config), build_grid(config)
    out_dir = Path(out) if out is not None else Path(config.output)

    report = verify_assumptions(
        spec, scenario_box(spec, grid), settings.ASSUMPTION_SAMPLES, settings.ASSUMPTION_SEED
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(report, out_dir / "assumptions.json")
    if not report.passed:
        failed = [
            name.removeprefix("pass_") for name, value in report if name.startswith("pass_") and not value
        ]
        raise AssumptionViolation(
            f"Scenario {spec.name} fails the sampled assumptions: {', '.join(failed)} "
            f"(see {out_dir / 'assumptions.json'})"
        )
    return Scenario(config=config, spec=spec, grid=grid, out_dir=out_dir)


def resolve_seeds(scenario: Scenario, seed: int | None) -> list[int]:
    return [seed] if seed is not None else list(scenario.config.run.seeds)


def map_seeds(fn: Callable[[int], object], seeds: list[int]) -> list:
    """
    Run fn once per seed, in parallel up to settings.THREADS workers.
    Every seed writes its own files, so outputs do not depend on the worker count.
    """
    if len(seeds) == 1 or settings.THREADS <= 1:
        return [fn(seed) for seed in seeds]
    return Parallel(n_jobs=min(settings.THREADS, len(seeds)))(delayed(fn)(seed) for seed in seeds)


def scenario_options(fn):
    """--config, --seed and --out, shared by the pipeline commands."""

    @click.option(
        "--config",
        "config_file",
        type=click.Path(dir_okay=False, path_type=Path),
        required=True,
        help="Scenario YAML file.",
    )
    @click.option("--seed", type=int, default=None, help="Run one seed instead of run.seeds.")
    @click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Output directory (default: the scenario's output).",
    )
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)

    return wrapper


def exit_codes(fn):
    """Map ConfigError to exit 2 and other engine errors to exit 3."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ZakaiError as e:
            kind = "configuration" if isinstance(e, ConfigError) else "runtime"
            logger.error(f"[CLI] {type(e).__name__}: {e}")
            click.echo(f"Error ({kind}): {type(e).__name__}: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code) from e
        except FileNotFoundError as e:
            logger.error(f"[CLI] Missing input: {e}")
            click.echo(f"Error (runtime): missing input: {e}", err=True)
            raise click.exceptions.Exit(EXIT_RUNTIME) from e

    return wrapper
