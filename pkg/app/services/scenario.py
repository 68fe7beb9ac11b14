"""
Scenario loading: YAML -> ScenarioConfig -> SystemSpec / GridSpec.
"""

import logging
from pathlib import Path

import numpy as np
import yaml
from pydantic import ValidationError

from app.errors import ConfigError
from app.models import GridSpec, InitialDensity, SystemSpec
from app.schemas.scenario import ScenarioConfig
from app.services.families import ConstantCoefficient, LinearCoefficient, build_coefficient
from app.services.model import mollify_theta
from app.services.oracles import LinearGaussianSpec

# Configure logging
logger = logging.getLogger(__name__)


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"])
        parts.append(f"{location}: {item['msg']}" if location else item["msg"])
    return "; ".join(parts)


def parse_scenario(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def load_scenario(file: Path) -> ScenarioConfig:
    """Read and validate a YAML scenario file."""
    file = Path(file)
    try:
        data = yaml.safe_load(file.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read scenario {file}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Scenario {file} must be a mapping")
    config = parse_scenario(data)
    logger.info(f"[CLI] Loaded scenario {config.system.name!r} from {file}")
    return config


def dump_scenario(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json", exclude_none=True), sort_keys=False)


def build_system_spec(config: ScenarioConfig) -> SystemSpec:
    """Instantiate the coefficient families and constants of a scenario."""
    s = config.system
    m = s.d1 - s.d
    coefficients = {
        "b": build_coefficient(s.b, (s.d,), s.d1, "system.b"),
        "theta": build_coefficient(s.theta, (s.d, s.d2), s.d1, "system.theta"),
        "B": build_coefficient(s.B, (m,), s.d1, "system.B"),
        "Theta": build_coefficient(s.Theta, (m, s.d2), m, "system.Theta"),
    }
    static = not any(
        coefficients[name].depends_on(s.d, s.d1) for name in ("b", "theta", "B")
    ) and not coefficients["Theta"].depends_on(0, m)

    if s.pi0.kind == "gaussian":
        pi0 = InitialDensity.gaussian(s.pi0.mean, s.pi0.cov)
    else:
        pi0 = InitialDensity.tent(s.pi0.center, s.pi0.width)
    try:
        spec = SystemSpec(
            d=s.d,
            d1=s.d1,
            d2=s.d2,
            K=s.K,
            delta=s.delta,
            bound=s.bound,
            T=s.T,
            pi0=pi0,
            y0=np.zeros(m) if s.y0 is None else np.asarray(s.y0, dtype=float),
            static_conditioning=static,
            name=s.name,
            **coefficients,
        )
    except ValueError as e:
        raise ConfigError(f"system: {e}") from e
    if s.mollify is not None:
        spec = mollify_theta(spec, s.mollify)
    return spec


def build_grid(config: ScenarioConfig) -> GridSpec:
    return GridSpec.symmetric(config.system.d, config.grid.R, config.grid.h)


def scenario_box(spec: SystemSpec, grid: GridSpec, y_radius: float | None = None) -> np.ndarray:
    """z-box for assumption checks: the grid box in x, y0 +/- y_radius in y."""
    y_radius = max(grid.upper) if y_radius is None else y_radius
    x_box = np.column_stack([grid.lower, grid.upper])
    y_box = np.column_stack([spec.y0 - y_radius, spec.y0 + y_radius])
    return np.vstack([x_box, y_box])


def linear_gaussian_from_config(config: ScenarioConfig) -> LinearGaussianSpec:
    """
    Extract the Kalman-Bucy parameters of a linear-Gaussian scenario.

    Raises:
        ConfigError: the scenario is not linear-Gaussian with independent
            signal/observation noise
    """
    s = config.system
    m = s.d1 - s.d
    if s.mollify is not None or s.pi0.kind != "gaussian":
        raise ConfigError("Kalman oracle needs an unmollified scenario with Gaussian pi0")
    spec = build_system_spec(config)
    b, B = spec.b, spec.B
    if not (isinstance(b, LinearCoefficient) and isinstance(B, LinearCoefficient)):
        raise ConfigError("Kalman oracle needs linear b and B")
    if not (isinstance(spec.theta, ConstantCoefficient) and isinstance(spec.Theta, ConstantCoefficient)):
        raise ConfigError("Kalman oracle needs constant theta and Theta")
    if np.any(b.slope[:, s.d:] != 0) or np.any(B.slope[:, s.d:] != 0) or np.any(B.offset != 0):
        raise ConfigError("Kalman oracle needs b = A x + a0 and B = H x")
    try:
        return LinearGaussianSpec(
            A=b.slope[:, : s.d],
            a0=b.offset,
            H=B.slope[:, : s.d],
            theta_const=spec.theta(0.0, np.zeros(s.d1)),
            Theta_const=spec.Theta(0.0, np.zeros(m)),
            m0=np.asarray(s.pi0.mean),
            P0=np.asarray(s.pi0.cov),
        )
    except ValueError as e:
        raise ConfigError(f"Kalman oracle: {e}") from e
