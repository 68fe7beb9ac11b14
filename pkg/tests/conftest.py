"""
Shared fixtures: scenario configs built from the seed scenarios, with dotted
overrides for coarse test grids.
"""

import copy

import pytest
import yaml

from app.schemas.scenario import ScenarioConfig
from app.seed import SAMPLE_SCENARIOS
from app.services.scenario import build_grid, build_system_spec, parse_scenario


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale studies")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale study, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def scenario_data(name: str, **overrides) -> dict:
    """
    Raw scenario mapping with overrides given as dotted keys, e.g.
    scenario_data("heat", **{"grid.h": 0.1}).
    """
    data = copy.deepcopy(SAMPLE_SCENARIOS[name])
    for dotted, value in overrides.items():
        *parents, leaf = dotted.split(".")
        target = data
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    return data


@pytest.fixture
def make_config():
    def factory(name: str, **overrides) -> ScenarioConfig:
        return parse_scenario(scenario_data(name, **overrides))

    return factory


@pytest.fixture
def write_config(tmp_path):
    """Write a (possibly raw, possibly invalid) scenario to a YAML file."""

    def factory(name: str, filename: str = "scenario.yaml", **overrides):
        data = scenario_data(name, **overrides)
        file = tmp_path / filename
        file.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
        return file

    return factory


@pytest.fixture
def kalman_spec(make_config):
    return build_system_spec(make_config("kalman_benchmark"))


@pytest.fixture
def heat_spec(make_config):
    return build_system_spec(make_config("heat"))


@pytest.fixture
def sinusoidal_spec(make_config):
    return build_system_spec(make_config("sinusoidal"))


@pytest.fixture
def coarse_grid(make_config):
    return build_grid(make_config("kalman_benchmark", **{"grid.h": 0.1}))
