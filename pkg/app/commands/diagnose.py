"""
`diagnose`: read a filter run back from disk and write its DiagnosticsReport
and innovation stream; with several seeds also a summary over seeds.
"""

import logging
from pathlib import Path

import click

from app.commands.common import Scenario, exit_codes, load, map_seeds, resolve_seeds, scenario_options
from app.commands.simulate import path_file
from app.schemas.reports import DiagnosticsReport, SeedSummary
from app.services.artifacts import read_path_binary, read_trajectory, write_innovation_csv, write_json
from app.services.diagnostics import (
    HolderEstimate,
    diagnose,
    holder_moment_summary,
    innovation_path,
    mass_moment_summary,
)

# Configure logging
logger = logging.getLogger(__name__)

MEAN_Z_LIMIT = 3.0


def run_diagnose(scenario: Scenario, seed: int):
    out_dir = scenario.out_dir
    traj = read_trajectory(out_dir, seed)
    real_data = scenario.config.run.real_data
    path = None
    if not real_data:
        source = path_file(out_dir, seed)
        if not source.exists():
            raise FileNotFoundError(f"No path replay file {source}")
        path = read_path_binary(source)

    report = diagnose(traj, path, scenario.spec, seed=seed, real_data=real_data)
    write_json(report, out_dir / f"diagnostics_seed{seed}.json")
    write_innovation_csv(traj.times, traj.p_beta, innovation_path(traj), out_dir / f"innovation_seed{seed}.csv")
    return report, traj


def summarize(seeds: list[int], results: list) -> SeedSummary:
    reports: list[DiagnosticsReport] = [report for report, _ in results]
    holder = [
        HolderEstimate(
            alpha_t=r.holder_t_exponent,
            alpha_x=r.holder_x_exponent,
            t_degenerate=r.holder_t_degenerate,
            x_degenerate=r.holder_x_degenerate,
        )
        for r in reports
    ]
    return SeedSummary(
        seeds=seeds,
        mass_moments=mass_moment_summary([traj for _, traj in results]),
        holder=holder_moment_summary(holder),
        innovation_qv_error_max=max(r.innovation_qv_error for r in reports),
        innovation_mean_z_exceedances=sum(r.innovation_mean_z > MEAN_Z_LIMIT for r in reports),
    )


@click.command("diagnose")
@scenario_options
@exit_codes
def diagnose_command(config_file: Path, seed: int | None, out: Path | None) -> None:
    """Write diagnostics reports for filter runs on disk."""
    scenario = load(config_file, out)
    seeds = resolve_seeds(scenario, seed)
    results = map_seeds(lambda s: run_diagnose(scenario, s), seeds)
    if len(seeds) > 1:
        summary = summarize(seeds, results)
        write_json(summary, scenario.out_dir / "summary.json")
        logger.info(
            f"[CLI] diagnose summary: qv_error_max={summary.innovation_qv_error_max:.3g} "
            f"mean_z exceedances={summary.innovation_mean_z_exceedances}"
        )
