"""
Independent reference filters: the Kalman-Bucy filter for linear-Gaussian
systems and a particle filter for general ones.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from app.config import settings
from app.errors import DegeneracyError, GridMismatch, RiccatiBlowup
from app.models import DensityField, GridSpec, InitialDensity, PathSample, SystemSpec
from app.services.families import ConstantCoefficient, LinearCoefficient
from app.services.model import compute_psi

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearGaussianSpec:
    """
    Linear-Gaussian specialization of the system: b = A x + a0, B = H x,
    constant diffusions acting on disjoint Wiener coordinates, Gaussian x_0.

    Attributes:
        A: d x d signal matrix
        a0: signal drift offset
        H: (d1 - d) x d observation matrix
        theta_const: d x d2 signal diffusion
        Theta_const: (d1 - d) x d2 observation diffusion
        m0, P0: initial mean and covariance
    """

    A: np.ndarray
    a0: np.ndarray
    H: np.ndarray
    theta_const: np.ndarray
    Theta_const: np.ndarray
    m0: np.ndarray
    P0: np.ndarray

    def __post_init__(self) -> None:
        for name in ("A", "a0", "H", "theta_const", "Theta_const", "m0", "P0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        d = self.A.shape[0]
        if self.H.shape[1] != d or self.theta_const.shape[0] != d:
            raise ValueError("A, H and theta_const have inconsistent signal dimensions")
        shared = np.any(self.theta_const != 0, axis=0) & np.any(self.Theta_const != 0, axis=0)
        if np.any(shared):
            raise ValueError(
                f"Signal and observation noise share Wiener coordinates {np.flatnonzero(shared).tolist()}"
            )
        if np.linalg.matrix_rank(self.Theta_const @ self.Theta_const.T) < self.H.shape[0]:
            raise ValueError("Theta_const Theta_const* must be invertible")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    def system_spec(self, K: float, delta: float, T: float, y0=None, name: str = "linear-gaussian") -> SystemSpec:
        """The equivalent SystemSpec built from registry families."""
        d, m = self.d, self.m
        d1, d2 = d + m, self.theta_const.shape[1]
        return SystemSpec(
            d=d,
            d1=d1,
            d2=d2,
            b=LinearCoefficient((d,), d1, slope=np.hstack([self.A, np.zeros((d, m))]), offset=self.a0),
            theta=ConstantCoefficient((d, d2), d1, value=self.theta_const),
            B=LinearCoefficient((m,), d1, slope=np.hstack([self.H, np.zeros((m, m))])),
            Theta=ConstantCoefficient((m, d2), m, value=self.Theta_const),
            K=K,
            delta=delta,
            T=T,
            pi0=InitialDensity.gaussian(self.m0, self.P0),
            y0=np.zeros(m) if y0 is None else y0,
            static_conditioning=True,
            name=name,
        )


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """
    Weighted particle cloud at time t.

    Attributes:
        t: time
        positions: particle positions, shape (N, d)
        log_weights: log weights normalized so the weights sum to one
        ess: effective sample size 1 / sum w^2
    """

    t: float
    positions: np.ndarray
    log_weights: np.ndarray
    ess: float

    @classmethod
    def build(cls, t: float, positions: np.ndarray, log_weights: np.ndarray) -> "ParticleEnsemble":
        log_weights = log_weights - logsumexp(log_weights)
        weights = np.exp(log_weights)
        return cls(t=t, positions=positions.copy(), log_weights=log_weights, ess=float(1.0 / np.sum(weights**2)))

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions

    def covariance(self) -> np.ndarray:
        centred = self.positions - self.mean()
        return np.einsum("i,ij,ik->jk", self.weights, centred, centred)

    def expectation(self, values: np.ndarray) -> np.ndarray:
        """Weighted mean of per-particle values (leading axis = particles)."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))


def kalman_bucy(
    lin: LinearGaussianSpec,
    path: PathSample,
    dt: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Euler discretization of the Kalman-Bucy filter driven by the path's dy:

        dm = (A m + a0) dt + P H* R^-1 (dy - H m dt)
        dP = (A P + P A* + Q - P H* R^-1 H P) dt

    with Q = theta theta*, R = Theta Theta*.

    Returns:
        (means of shape (n + 1, d), covariances of shape (n + 1, d, d))

    Raises:
        RiccatiBlowup: covariance lost positive definiteness
    """
    dt = path.dt if dt is None else dt
    Q = lin.theta_const @ lin.theta_const.T
    R_inv = np.linalg.inv(lin.Theta_const @ lin.Theta_const.T)
    steps = path.steps
    means = np.empty((steps + 1, lin.d))
    covs = np.empty((steps + 1, lin.d, lin.d))
    means[0], covs[0] = lin.m0, lin.P0
    dy = path.dy

    for k in range(steps):
        m, P = means[k], covs[k]
        gain = P @ lin.H.T @ R_inv
        means[k + 1] = m + (lin.A @ m + lin.a0) * dt + gain @ (dy[k] - lin.H @ m * dt)
        P_next = P + (lin.A @ P + P @ lin.A.T + Q - gain @ lin.H @ P) * dt
        P_next = 0.5 * (P_next + P_next.T)
        if not np.linalg.eigvalsh(P_next).min() > 0.0:
            raise RiccatiBlowup(f"Covariance lost positive definiteness at t={path.times[k + 1]:.6g}")
        covs[k + 1] = P_next

    logger.info(f"[ORACLE] Kalman-Bucy: final mean={means[-1]} var={np.diag(covs[-1])}")
    return means, covs


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling (low variance)."""
    n = len(weights)
    cumsum = np.cumsum(weights)
    u = rng.uniform(0, 1.0 / n) + np.arange(n) / n
    return np.clip(np.searchsorted(cumsum, u), 0, n - 1)


def particle_filter(
    spec: SystemSpec,
    path: PathSample,
    N: int,
    seed: int,
    *,
    record_every: int = 1,
) -> list[ParticleEnsemble]:
    """
    Particle approximation of the filter under the reference measure.

    Each step the weights gain exp(beta(x) . dw^ - 1/2 |beta(x)|^2 dt) with
    dw^ = Psi dy, then particles move by

        x += (b - sigma beta) dt + sigma dw^ + theta (I - Theta* Psi^2 Theta) dW,

    dW fresh noise independent of the path. Without cross terms (sigma = 0)
    this is the bootstrap filter. Systematic resampling when the effective
    sample size drops below PF_RESAMPLE_FRACTION * N.

    Args:
        spec: system specification
        path: path whose observations drive the filter
        N: number of particles
        seed: RNG seed for the initial cloud and propagation noise
        record_every: keep an ensemble every this many steps (last kept)

    Returns:
        Ensembles at the recorded mesh points

    Raises:
        DegeneracyError: fewer than PF_MIN_DISTINCT distinct particles
            survive a resampling
    """
    if N < 100:
        logger.warning(f"[ORACLE] Particle filter with only N={N} particles")
    rng = np.random.default_rng(seed)
    x = spec.pi0.sample(rng, N)
    log_w = np.zeros(N)
    ensembles: list[ParticleEnsemble] = []
    steps, dt = path.steps, path.dt
    dy = path.dy
    resamples = 0

    for k in range(steps + 1):
        t, y = path.times[k], path.y[k]
        if k % record_every == 0 or k == steps:
            ensembles.append(ParticleEnsemble.build(t, x, log_w))
        if k == steps:
            break

        z = np.concatenate([x, np.broadcast_to(y, (N, spec.m))], axis=1)
        psi = compute_psi(spec, t, y)
        Theta = np.asarray(spec.Theta(t, y), dtype=float)
        dw_hat = psi @ dy[k]
        beta = np.asarray(spec.B(t, z), dtype=float) @ psi
        theta = np.asarray(spec.theta(t, z), dtype=float)
        sigma = theta @ Theta.T @ psi
        complement = np.eye(spec.d2) - Theta.T @ psi @ psi @ Theta

        log_w = log_w + beta @ dw_hat - 0.5 * np.sum(beta**2, axis=1) * dt
        drift = np.asarray(spec.b(t, z), dtype=float) - np.einsum("nik,nk->ni", sigma, beta)
        fresh = rng.standard_normal((N, spec.d2)) * np.sqrt(dt)
        x = (
            x
            + drift * dt
            + sigma @ dw_hat
            + np.einsum("nij,nj->ni", theta, fresh @ complement.T)
        )

        log_w = log_w - logsumexp(log_w)
        weights = np.exp(log_w)
        ess = 1.0 / np.sum(weights**2)
        if ess < settings.PF_RESAMPLE_FRACTION * N:
            idx = systematic_resample(weights, rng)
            distinct = len(np.unique(idx))
            if distinct < min(settings.PF_MIN_DISTINCT, N):
                raise DegeneracyError(f"Only {distinct} distinct particles survive at t={t:.6g}")
            x = x[idx]
            log_w = np.zeros(N)
            resamples += 1

    logger.info(
        f"[ORACLE] Particle filter: N={N} resamples={resamples} final ess={ensembles[-1].ess:.1f}"
    )
    return ensembles


def kde_field(ensemble: ParticleEnsemble, grid: GridSpec) -> DensityField:
    """
    Weighted Gaussian kernel density estimate on the grid nodes.
    Bandwidth: Silverman's rule (scipy gaussian_kde, effective sample size).
    """
    kde = stats.gaussian_kde(ensemble.positions.T, bw_method="silverman", weights=ensemble.weights)
    values = kde(grid.points.reshape(-1, grid.d).T)
    return DensityField(values.reshape(grid.nodes), grid)


def density_distance(
    field_a: DensityField | ParticleEnsemble,
    field_b: DensityField | ParticleEnsemble,
) -> float:
    """
    L1 distance by trapezoid quadrature of |A - B|. A particle ensemble is
    first turned into a KDE on the other argument's grid.

    Raises:
        GridMismatch: fields on different grids, or two ensembles
    """
    if isinstance(field_a, ParticleEnsemble) and isinstance(field_b, ParticleEnsemble):
        raise GridMismatch("At least one argument must be a grid field")
    if isinstance(field_a, ParticleEnsemble):
        field_a = kde_field(field_a, field_b.grid)
    if isinstance(field_b, ParticleEnsemble):
        field_b = kde_field(field_b, field_a.grid)
    if not field_a.grid.same_as(field_b.grid):
        raise GridMismatch(f"Grids differ: {field_a.grid} vs {field_b.grid}")
    return field_a.grid.integrate(np.abs(field_a.values - field_b.values))
