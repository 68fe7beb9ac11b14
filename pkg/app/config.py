"""
Application configuration using pydantic-settings.
Loads environment variables (prefix ZAKAI_) from .env file.
"""

from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Engine settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="ZAKAI_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application settings
    APP_NAME: str = "Zakai Filter Engine"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Upper bound on joblib workers for seed sweeps (ZAKAI_THREADS)
    THREADS: int = 1

    # Observation noise square root
    PSI_EIGEN_FLOOR: float = 1e-12
    PSI_IDENTITY_TOL: float = 1e-8

    # Assumption checker
    ASSUMPTION_TOL: float = 1e-9
    ASSUMPTION_SAMPLES: int = 2000
    ASSUMPTION_SEED: int = 0
    COEFFICIENT_BOUND: float = 1e6

    # Grid
    GRID_MIN_NODES: int = 8
    GRID_MARGIN: float = 0.5

    # Simulator: |z| beyond this radius means a misconfigured scenario
    SIM_GUARD_RADIUS: float = 1e6

    # Mollifier quadrature (nodes per axis of the bump support)
    MOLLIFIER_NODES: int = 96
    MOLLIFIER_TOL: float = 1e-8

    # Zakai solver
    TIME_SCHEME: Literal["backward_euler", "crank_nicolson"] = "backward_euler"
    ADVECTION_SCHEME: Literal["upwind", "central"] = "upwind"
    LINEAR_SOLVER: Literal["direct", "bicgstab"] = "direct"
    LINEAR_SOLVE_TOL: float = 1e-10
    LINEAR_SOLVE_MAXITER: int = 2000
    MASS_COLLAPSE_FLOOR: float = 1e-12

    # Particle filter
    PF_RESAMPLE_FRACTION: float = 0.5
    PF_MIN_DISTINCT: int = 10

    # Diagnostics
    HOLDER_LEVELS: int = 5
    HOLDER_EXPONENT_CAP: float = 1.5
    SCHEMA_VERSION: str = "1.0"


# Global settings instance
settings = Settings()
