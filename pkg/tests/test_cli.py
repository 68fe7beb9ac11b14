import json

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from app.config import settings
from app.main import cli
from app.schemas.reports import AssumptionReport, ComparisonReport, DiagnosticsReport, SeedSummary
from app.services.artifacts import read_density_binary
from app.services.scenario import build_grid, build_system_spec, load_scenario
from app.services.sde_sim import simulate_system
from app.services.zakai import solve_zakai

# coarse settings keep every command well under a second of numerics
COARSE = {"grid.h": 0.1, "time.dt": 0.01, "run.snapshot_every": 25, "oracle.particles": 500}


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def test_simulate_is_deterministic(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    for out in ("a", "b"):
        result = invoke(runner, "simulate", "--config", config, "--seed", 1, "--out", tmp_path / out)
        assert result.exit_code == 0, result.output
    for name in ("path_seed1.csv", "path_seed1.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_non_integral_step_exits_with_config_code(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **{**COARSE, "time.dt": 0.3})
    result = invoke(runner, "simulate", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "time.dt" in result.output


def test_missing_family_exits_with_config_code(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **{**COARSE, "system.theta": {"value": [[1.0, 0.0]]}})
    result = invoke(runner, "simulate", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "known families: constant, kink, linear, sinusoidal" in result.output


def test_filter_writes_reproducible_artifacts(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    for out in ("a", "b"):
        result = invoke(runner, "filter", "--config", config, "--seed", 3, "--out", tmp_path / out)
        assert result.exit_code == 0, result.output
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "trajectory_seed3.json" in files
    assert "streams_seed3.csv" in files
    assert "density_seed3_step000100.bin" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_filter_snapshot_cadence_flag(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    result = invoke(runner, "filter", "--config", config, "--seed", 3, "--out", tmp_path, "--snapshot-every", 50)
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "trajectory_seed3.json").read_text())
    assert manifest["snapshot_steps"] == [0, 50, 100]


def test_filter_replays_an_existing_path(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    invoke(runner, "simulate", "--config", config, "--seed", 4, "--out", tmp_path / "sim")
    replay = tmp_path / "sim" / "path_seed4.bin"
    result = invoke(runner, "filter", "--config", config, "--seed", 4, "--out", tmp_path / "f", "--path", replay)
    assert result.exit_code == 0, result.output
    direct = invoke(runner, "filter", "--config", config, "--seed", 4, "--out", tmp_path / "g")
    assert direct.exit_code == 0
    name = "streams_seed4.csv"
    assert (tmp_path / "f" / name).read_bytes() == (tmp_path / "g" / name).read_bytes()


def test_heat_snapshot_matches_direct_solve(runner, write_config, tmp_path):
    config_file = write_config("heat", **COARSE)
    result = invoke(runner, "filter", "--config", config_file, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 0, result.output

    config = load_scenario(config_file)
    spec = build_system_spec(config)
    traj = solve_zakai(spec, simulate_system(spec, 0.01, 1), build_grid(config), snapshot_every=25)
    stored = read_density_binary(tmp_path / "density_seed1_step000050.bin")
    assert np.max(np.abs(stored.pibar.values - traj.final.pibar.values)) <= 1e-8


def test_mass_collapse_exits_with_runtime_code_and_dump(runner, write_config, tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "MASS_COLLAPSE_FLOOR", 1e6)
    config = write_config("heat", **COARSE)
    result = invoke(runner, "filter", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 3
    assert "MassCollapseError" in result.output
    failure = json.loads((tmp_path / "failure_seed1.json").read_text())
    assert failure["error"] == "MassCollapseError"
    assert failure["seed"] == 1


def test_diagnose_without_inputs_exits_with_runtime_code(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    result = invoke(runner, "diagnose", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 3


def test_diagnose_report_for_uninformative_scenario(runner, write_config, tmp_path):
    config = write_config("heat", **{**COARSE, "time.dt": 0.005})
    assert invoke(runner, "filter", "--config", config, "--seed", 2, "--out", tmp_path).exit_code == 0
    result = invoke(runner, "diagnose", "--config", config, "--seed", 2, "--out", tmp_path)
    assert result.exit_code == 0, result.output

    payload = json.loads((tmp_path / "diagnostics_seed2.json").read_text())
    jsonschema.validate(payload, DiagnosticsReport.model_json_schema())
    assert payload["schema_version"] == settings.SCHEMA_VERSION
    assert payload["mass_residual_sup"] <= 1e-8
    assert (tmp_path / "innovation_seed2.csv").exists()


def test_diagnose_summary_over_seeds(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **{**COARSE, "run.seeds": [1, 2, 3]})
    assert invoke(runner, "filter", "--config", config, "--out", tmp_path).exit_code == 0
    result = invoke(runner, "diagnose", "--config", config, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    summary = json.loads((tmp_path / "summary.json").read_text())
    jsonschema.validate(summary, SeedSummary.model_json_schema())
    assert summary["seeds"] == [1, 2, 3]
    assert summary["mass_moments"]["runs"] == 3


def test_compare_with_oracles(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    result = invoke(runner, "compare", "--config", config, "--seed", 5, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "comparison_seed5.json").read_text())
    jsonschema.validate(payload, ComparisonReport.model_json_schema())
    assert payload["times"] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.all(np.abs(payload["kalman"]["scaled_mean_delta"]) < 0.5)
    assert payload["particle"]["particles"] == 500
    assert len(payload["particle"]["l1_distance"]) == 5
    stability = payload["stability"]
    assert stability["shift"] == 0.25
    assert stability["sensitivity"] > 0.0
    assert stability["domination"] <= 1.0 + 1e-6


def test_self_compare_has_zero_distance(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    assert invoke(runner, "filter", "--config", config, "--seed", 6, "--out", tmp_path).exit_code == 0
    result = invoke(
        runner, "compare", "--config", config, "--seed", 6, "--out", tmp_path, "--particles", 0, "--reference", tmp_path
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "comparison_seed6.json").read_text())
    assert payload["particle"] is None
    assert payload["reference"]["l1_distance"] == [0.0] * 5
    assert np.all(np.array(payload["reference"]["mean_delta"]) == 0.0)


def test_compare_against_other_grid_exits_with_config_code(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    other = write_config("kalman_benchmark", filename="other.yaml", **{**COARSE, "grid.h": 0.2})
    assert invoke(runner, "filter", "--config", other, "--seed", 1, "--out", tmp_path / "other").exit_code == 0
    result = invoke(
        runner,
        "compare",
        "--config",
        config,
        "--seed",
        1,
        "--out",
        tmp_path / "main",
        "--particles",
        0,
        "--reference",
        tmp_path / "other",
    )
    assert result.exit_code == 2
    assert "GridMismatch" in result.output


def test_kalman_oracle_on_nonlinear_scenario_is_a_config_error(runner, write_config, tmp_path):
    config = write_config("sinusoidal", **{**COARSE, "oracle.kalman": True})
    result = invoke(runner, "compare", "--config", config, "--seed", 1, "--out", tmp_path, "--particles", 0)
    assert result.exit_code == 2


def test_scenarios_command(runner, tmp_path):
    result = invoke(runner, "scenarios", "--out", tmp_path)
    assert result.exit_code == 0, result.output
    assert sorted(p.stem for p in tmp_path.glob("*.yaml")) == sorted(
        ["heat", "holder_tent", "kalman_benchmark", "kink", "sinusoidal"]
    )
    assert invoke(runner, "scenarios", "--out", tmp_path, "nonesuch").exit_code == 2


def test_diagnose_rerun_reproduces_the_stored_report(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    assert invoke(runner, "filter", "--config", config, "--seed", 7, "--out", tmp_path).exit_code == 0
    assert invoke(runner, "diagnose", "--config", config, "--seed", 7, "--out", tmp_path).exit_code == 0
    stored = (tmp_path / "diagnostics_seed7.json").read_bytes()
    assert invoke(runner, "diagnose", "--config", config, "--seed", 7, "--out", tmp_path).exit_code == 0
    assert (tmp_path / "diagnostics_seed7.json").read_bytes() == stored


def test_commands_record_the_assumption_check(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **COARSE)
    result = invoke(runner, "simulate", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "assumptions.json").read_text())
    jsonschema.validate(payload, AssumptionReport.model_json_schema())
    assert payload["passed"]
    assert payload["n_samples"] == settings.ASSUMPTION_SAMPLES


def test_degenerate_observation_noise_exits_with_config_code(runner, write_config, tmp_path):
    singular = {"family": "constant", "value": [[0.0, 0.0]]}
    config = write_config("kalman_benchmark", **{**COARSE, "system.Theta": singular})
    result = invoke(runner, "filter", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "AssumptionViolation" in result.output
    payload = json.loads((tmp_path / "assumptions.json").read_text())
    assert not payload["passed"]
    assert not payload["pass_nondegenerate"]
    assert not payload["pass_psi"]
    assert not (tmp_path / "trajectory_seed1.json").exists()


def test_coefficients_above_the_declared_bound_exit_with_config_code(runner, write_config, tmp_path):
    config = write_config("kalman_benchmark", **{**COARSE, "system.bound": 2.0})
    result = invoke(runner, "simulate", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "bounded" in result.output


def test_indefinite_initial_covariance_exits_with_config_code(runner, write_config, tmp_path):
    pi0 = {"kind": "gaussian", "mean": [0.0], "cov": [[-1.0]]}
    config = write_config("kalman_benchmark", **{**COARSE, "system.pi0": pi0})
    result = invoke(runner, "filter", "--config", config, "--seed", 1, "--out", tmp_path)
    assert result.exit_code == 2
    assert "positive definite" in result.output
