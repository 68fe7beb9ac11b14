"""
Pydantic schemas for the reports the engine writes as JSON.
"""

from pydantic import BaseModel, ConfigDict, Field

from app.config import settings


class ReportModel(BaseModel):
    """Base for JSON reports: finite numbers only, no unknown keys."""

    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")


class AssumptionReport(ReportModel):
    """
    Sampled verification of the Lipschitz, nondegeneracy and
    observation-noise assumptions over a scenario box.

    Attributes:
        lipschitz_estimate: max difference quotient per coefficient (b, theta, B, Theta)
        coefficient_bound: largest coefficient magnitude seen
        declared_bound: bound the coefficients must stay under (scenario or settings)
        min_eigen_atilde: smallest eigenvalue of 1/2 theta~ theta~*
        min_eigen_a: smallest eigenvalue of a = 1/2 theta theta*
        psi_norm_bound: largest eigenvalue of Psi
        projector_bound: smallest eigenvalue of theta (I - Theta* Psi^2 Theta) theta*
    """

    schema_version: str = settings.SCHEMA_VERSION
    K: float
    delta: float
    n_samples: int
    lipschitz_estimate: dict[str, float]
    coefficient_bound: float
    declared_bound: float
    min_eigen_atilde: float
    min_eigen_a: float
    psi_norm_bound: float
    projector_bound: float
    pass_lipschitz: bool
    pass_bounded: bool
    pass_nondegenerate: bool
    pass_psi: bool
    pass_projector: bool
    passed: bool


class DiagnosticsReport(ReportModel):
    """Structural identities and regularity statistics of one filter run."""

    schema_version: str = settings.SCHEMA_VERSION
    seed: int | None = None
    real_data: bool = False
    mass_residual_sup: float | None = Field(
        default=None,
        description="sup_t |(pibar_t,1) - RHS_t| of the mass SDE; null in real-data mode",
    )
    exp_mass_residual_sup: float
    inverse_mass_residual_sup: float
    innovation_qv_error: float
    innovation_mean_z: float
    holder_t_exponent: float = Field(..., ge=0.0, le=1.5)
    holder_x_exponent: float = Field(..., ge=0.0, le=1.5)
    holder_t_degenerate: bool = False
    holder_x_degenerate: bool = False
    min_density_ratio: float
    mass_sup: float
    mass_inf: float
    w1p_times: list[float] = Field(default_factory=list)
    w1p_norm_series: dict[str, list[float]] = Field(default_factory=dict)


class KalmanComparison(ReportModel):
    """Normalized Zakai moments against the Kalman-Bucy oracle (d = 1 components)."""

    mean_delta: list[list[float]]
    scaled_mean_delta: list[list[float]]
    variance_rel_error: list[list[float]]


class ParticleComparison(ReportModel):
    """Normalized Zakai density against the particle filter."""

    particles: int
    l1_distance: list[float]
    mean_delta: list[list[float]]
    p_beta_zakai: list[float]
    p_beta_particle: list[float]


class ReferenceComparison(ReportModel):
    """Normalized Zakai density against another stored Zakai run."""

    source: str
    l1_distance: list[float]
    mean_delta: list[list[float]]


class StabilityComparison(ReportModel):
    """L1 sensitivity of the Zakai run to a shift of pi_0 along every axis."""

    shift: float
    sensitivity: float
    domination: float


class ComparisonReport(ReportModel):
    """Zakai run against the oracles at the snapshot times."""

    schema_version: str = settings.SCHEMA_VERSION
    seed: int
    times: list[float]
    zakai_mean: list[list[float]]
    zakai_variance: list[list[float]]
    kalman: KalmanComparison | None = None
    particle: ParticleComparison | None = None
    reference: ReferenceComparison | None = None
    stability: StabilityComparison | None = None


class GridModel(ReportModel):
    lower: list[float]
    h: list[float]
    nodes: list[int]


class TrajectoryManifest(ReportModel):
    """Index of the files a filter run writes, read back by diagnose/compare."""

    schema_version: str = settings.SCHEMA_VERSION
    seed: int
    scenario: str
    dt: float
    grid: GridModel
    peak_index: list[int]
    streams_file: str
    snapshot_format: str
    snapshot_steps: list[int]
    snapshot_files: list[str]


class FailureReport(ReportModel):
    """Diagnostic dump written when a filter run aborts."""

    schema_version: str = settings.SCHEMA_VERSION
    seed: int
    scenario: str
    error: str
    message: str
    grid_nodes: list[int]
    dt: float


class SeedSummary(ReportModel):
    """Aggregates over the seeds of one diagnose invocation."""

    schema_version: str = settings.SCHEMA_VERSION
    seeds: list[int]
    mass_moments: dict[str, float]
    holder: dict[str, float]
    innovation_qv_error_max: float
    innovation_mean_z_exceedances: int
