import pytest
import yaml

from app.errors import ConfigError
from app.seed import SAMPLE_SCENARIOS, write_sample_scenarios
from app.services.families import LinearCoefficient
from app.services.model import MollifiedCoefficient
from app.services.scenario import (
    build_grid,
    build_system_spec,
    dump_scenario,
    load_scenario,
    parse_scenario,
)
from tests.conftest import scenario_data


@pytest.mark.parametrize("name", sorted(SAMPLE_SCENARIOS))
def test_seed_scenarios_build(name, make_config):
    config = make_config(name)
    spec = build_system_spec(config)
    grid = build_grid(config)
    assert spec.name == name
    assert spec.static_conditioning
    assert grid.d == spec.d
    assert grid.covers(spec.pi0.support_box(), 0.5)


@pytest.mark.parametrize("name", sorted(SAMPLE_SCENARIOS))
def test_yaml_round_trip_is_stable(name, make_config):
    config = make_config(name)
    reloaded = parse_scenario(yaml.safe_load(dump_scenario(config)))
    assert reloaded == config
    assert dump_scenario(reloaded) == dump_scenario(config)


def test_load_scenario_from_file(write_config):
    config = load_scenario(write_config("heat"))
    assert config.system.T == 0.5
    assert config.time.dt == 0.001


def test_non_integral_step_names_the_field(make_config):
    with pytest.raises(ConfigError, match="time.dt"):
        make_config("heat", **{"time.dt": 0.3})


def test_unknown_keys_are_rejected(make_config):
    with pytest.raises(ConfigError, match="system.colour"):
        make_config("heat", **{"system.colour": "blue"})
    with pytest.raises(ConfigError, match="grid.radius"):
        make_config("heat", **{"grid.radius": 3.0})


@pytest.mark.parametrize("field, value", [("grid.h", -0.1), ("system.delta", 0.0), ("time.dt", 0.0)])
def test_non_positive_values_are_rejected(make_config, field, value):
    with pytest.raises(ConfigError, match=field):
        make_config("heat", **{field: value})


def test_missing_family_lists_known_families(make_config):
    config = make_config("heat", **{"system.b": {"slope": [[0.0, 0.0]]}})
    with pytest.raises(ConfigError, match="known families: constant, kink, linear, sinusoidal"):
        build_system_spec(config)


def test_inconsistent_dimensions_are_rejected(make_config):
    with pytest.raises(ConfigError, match="d1 > d"):
        make_config("heat", **{"system.d1": 1})


def test_tent_needs_its_parameters(make_config):
    with pytest.raises(ConfigError, match="tent pi0"):
        make_config("holder_tent", **{"system.pi0": {"kind": "tent", "center": [0.0]}})


@pytest.mark.parametrize(
    "pi0, message",
    [
        ({"kind": "gaussian", "mean": [0.0], "cov": [[-1.0]]}, "positive definite"),
        ({"kind": "gaussian", "mean": [0.0], "cov": [[0.0]]}, "positive definite"),
        ({"kind": "gaussian", "mean": [0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}, "1x1"),
        ({"kind": "gaussian", "mean": [0.0, 0.0], "cov": [[1.0, 0.5], [0.0, 1.0]]}, "symmetric"),
    ],
)
def test_gaussian_pi0_covariance_is_validated(make_config, pi0, message):
    with pytest.raises(ConfigError, match=message):
        make_config("kalman_benchmark", **{"system.pi0": pi0})


def test_observation_dependent_drift_is_not_static(make_config):
    config = make_config("kalman_benchmark", **{"system.B": {"family": "linear", "slope": [[1.0, 0.1]]}})
    spec = build_system_spec(config)
    assert isinstance(spec.B, LinearCoefficient)
    assert not spec.static_conditioning


def test_mollify_option_wraps_theta(make_config):
    spec = build_system_spec(make_config("kink", **{"system.mollify": 8}))
    assert isinstance(spec.theta, MollifiedCoefficient)
    assert spec.static_conditioning


def test_invalid_yaml_is_a_config_error(tmp_path):
    file = tmp_path / "broken.yaml"
    file.write_text("system: [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_scenario(file)
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.yaml")


def test_write_sample_scenarios(tmp_path):
    files = write_sample_scenarios(tmp_path)
    assert sorted(f.stem for f in files) == sorted(SAMPLE_SCENARIOS)
    for file in files:
        assert load_scenario(file) == parse_scenario(scenario_data(file.stem))
