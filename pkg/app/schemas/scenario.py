"""
Pydantic schema of scenario files (YAML). Unknown keys are rejected at every
level; coefficient parameters are checked by the family registry when the
system is built.
"""

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InitialDensityConfig(StrictModel):
    """gaussian: mean + cov; tent: center + width (compact Lipschitz tent)."""

    kind: Literal["gaussian", "tent"]
    mean: list[float] | None = None
    cov: list[list[float]] | None = None
    center: list[float] | None = None
    width: list[float] | None = None

    @model_validator(mode="after")
    def check_parameters(self) -> "InitialDensityConfig":
        if self.kind == "gaussian":
            if self.mean is None or self.cov is None:
                raise ValueError("gaussian pi0 needs 'mean' and 'cov'")
            cov = np.asarray(self.cov, dtype=float)
            if cov.shape != (len(self.mean), len(self.mean)):
                raise ValueError(f"pi0 cov must be {len(self.mean)}x{len(self.mean)} to match mean")
            if not np.allclose(cov, cov.T):
                raise ValueError("pi0 cov must be symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as e:
                raise ValueError("pi0 cov must be positive definite") from e
        if self.kind == "tent":
            if self.center is None or self.width is None:
                raise ValueError("tent pi0 needs 'center' and 'width'")
            if len(self.width) != len(self.center):
                raise ValueError("tent center and width must have the same length")
            if any(w <= 0 for w in self.width):
                raise ValueError("tent width must be positive")
        return self


class SystemConfig(StrictModel):
    """
    Dimensions, coefficient families and constants.

    Each coefficient is a mapping {family: <name>, <parameter>: <value>, ...}.
    """

    name: str = "scenario"
    d: PositiveInt
    d1: PositiveInt
    d2: PositiveInt
    b: dict[str, Any]
    theta: dict[str, Any]
    B: dict[str, Any]
    Theta: dict[str, Any]
    K: PositiveFloat
    delta: PositiveFloat
    bound: PositiveFloat | None = Field(default=None, description="declared sup of the coefficients")
    T: PositiveFloat
    y0: list[float] | None = None
    pi0: InitialDensityConfig
    mollify: PositiveInt | None = Field(default=None, description="replace theta by zeta_n * theta")

    @model_validator(mode="after")
    def check_dimensions(self) -> "SystemConfig":
        if not (self.d1 > self.d and self.d2 >= self.d1):
            raise ValueError(f"need d1 > d and d2 >= d1, got d={self.d}, d1={self.d1}, d2={self.d2}")
        if self.d > 3:
            raise ValueError("grids are limited to d <= 3")
        return self


class GridConfig(StrictModel):
    R: PositiveFloat
    h: PositiveFloat


class TimeConfig(StrictModel):
    dt: PositiveFloat


class RunConfig(StrictModel):
    seeds: list[int] = Field(default_factory=lambda: [1])
    snapshot_every: PositiveInt | None = None
    snapshot_format: Literal["binary", "csv"] = "binary"
    real_data: bool = False


class OracleConfig(StrictModel):
    particles: PositiveInt = 10000
    kalman: bool = False
    # shift of pi_0 for the L1 stability check; 0 disables it
    initial_shift: float = Field(default=0.0, ge=0.0)


class ScenarioConfig(StrictModel):
    """A complete scenario file."""

    system: SystemConfig
    grid: GridConfig
    time: TimeConfig
    run: RunConfig = Field(default_factory=RunConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    output: str = "out"

    @model_validator(mode="after")
    def check_time_mesh(self) -> "ScenarioConfig":
        steps = round(self.system.T / self.time.dt)
        if steps < 1 or abs(steps * self.time.dt - self.system.T) > 1e-9 * self.system.T:
            raise ValueError(
                f"time.dt={self.time.dt} does not divide system.T={self.system.T} into whole steps"
            )
        return self
