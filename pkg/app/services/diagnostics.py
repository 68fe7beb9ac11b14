"""
Numerical checks of the structural identities satisfied by the Zakai
solution: mass SDE, innovation process, exponential representation of the
mass, Hölder regularity and discrete Sobolev norms.
"""

import logging
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from app.config import settings
from app.errors import GridMismatch, InsufficientResolution, MassCollapseError
from app.models import ConditionedCoefficients, FilterState, FilterTrajectory, PathSample, SystemSpec
from app.schemas.reports import DiagnosticsReport
from app.services.sde_sim import derived_wieners

# Configure logging
logger = logging.getLogger(__name__)

MIN_INNOVATION_STEPS = 100
MIN_HOLDER_LEVELS = 4


class InnovationStats(NamedTuple):
    qv_error: float
    mean_z: float


class HolderEstimate(NamedTuple):
    alpha_t: float
    alpha_x: float
    t_degenerate: bool
    x_degenerate: bool


class MartingaleCheck(NamedTuple):
    mean: float
    stderr: float
    z: float


def p_beta(state: FilterState, coeffs: ConditionedCoefficients) -> np.ndarray:
    """P_t[beta] = (pibar_t, 1)^-1 int beta_t pibar_t dx, one entry per channel."""
    mass = state.pibar.mass
    if not mass > settings.MASS_COLLAPSE_FLOOR:
        raise MassCollapseError(f"Mass {mass:.3e} below collapse floor")
    weighted = state.grid.weights * state.pibar.values
    return np.tensordot(weighted, coeffs.beta, axes=(tuple(range(state.grid.d)),) * 2) / mass


def p_beta_from_drift(
    state: FilterState,
    spec: SystemSpec,
    t: float,
    y: np.ndarray,
    psi: np.ndarray,
) -> np.ndarray:
    """The same quantity written as (pibar_t, 1)^-1 Psi int B(t, x, y_t) pibar_t dx."""
    grid = state.grid
    points = grid.points.reshape(-1, grid.d)
    z = np.concatenate([points, np.broadcast_to(y, (points.shape[0], spec.m))], axis=1)
    B = np.asarray(spec.B(t, z), dtype=float)
    weighted = (grid.weights * state.pibar.values).ravel()
    return psi @ (weighted @ B) / state.pibar.mass


def _true_beta_and_w_tilde(path: PathSample, spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    derived = derived_wieners(path, spec)
    return derived.beta, derived.w_tilde


def mass_identity_residual(traj: FilterTrajectory, path: PathSample, spec: SystemSpec) -> float:
    """
    sup_t |(pibar_t, 1) - RHS_t| where RHS_t is the left-point discretization of

        (pi_0, 1) + int (pibar, beta^k) Psi^{kr} B^r(s, z_s) ds
                  + int (pibar, beta^k) Psi^{kr} Theta^{rn}(s, y_s) dw^n_s

    using the true states and Wiener increments of the path.
    """
    beta_true, w_tilde = _true_beta_and_w_tilde(path, spec)
    pairing = traj.mass[:-1, None] * traj.p_beta[:-1]
    increments = np.sum(pairing * (beta_true * traj.dt + w_tilde), axis=1)
    rhs = traj.mass[0] + np.concatenate([[0.0], np.cumsum(increments)])
    residual = float(np.max(np.abs(traj.mass - rhs)))
    logger.info(f"[DIAG] Mass identity residual: {residual:.3e}")
    return residual


def innovation_path(
    traj: FilterTrajectory,
    path: PathSample | None = None,
    spec: SystemSpec | None = None,
) -> np.ndarray:
    """
    Innovation increments dw-check_k = Psi_k dy_k - P_k[beta] dt.

    Psi_k dy_k is recomputed from the path when one is given, otherwise taken
    from the increments the solver recorded.
    """
    if path is not None and spec is not None:
        w_hat = derived_wieners(path, spec).w_hat
    else:
        w_hat = traj.w_hat
    return w_hat - traj.p_beta[:-1] * traj.dt


def innovation_tests(increments: np.ndarray, dt: float) -> InnovationStats:
    """
    Wiener-process checks on increments: relative quadratic-variation error
    and the z-score of the terminal value.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim == 1:
        increments = increments[:, None]
    n, dim = increments.shape
    if n < MIN_INNOVATION_STEPS:
        raise InsufficientResolution(f"Need at least {MIN_INNOVATION_STEPS} increments, got {n}")
    T = n * dt
    qv = increments.T @ increments
    qv_error = float(np.max(np.abs(qv - T * np.eye(dim)))) / T
    mean_z = float(np.linalg.norm(increments.sum(axis=0))) / np.sqrt(T * dim)
    return InnovationStats(qv_error=qv_error, mean_z=mean_z)


def _exponent_sums(traj: FilterTrajectory, innovation: np.ndarray) -> np.ndarray:
    P = traj.p_beta[:-1]
    terms = np.sum(P * innovation, axis=1) + 0.5 * np.sum(P**2, axis=1) * traj.dt
    return np.concatenate([[0.0], np.cumsum(terms)])


def exponential_mass_residual(traj: FilterTrajectory, innovation: np.ndarray, dt: float | None = None) -> float:
    """sup_t |log (pibar_t, 1) - (sum P . dw-check + 1/2 sum |P|^2 dt)|."""
    if dt is not None and not np.isclose(dt, traj.dt):
        raise ValueError(f"dt={dt} does not match the trajectory step {traj.dt}")
    if not np.all(traj.mass > 0):
        raise MassCollapseError("Exponential representation needs positive mass throughout")
    exponent = _exponent_sums(traj, innovation)
    return float(np.max(np.abs(np.log(traj.mass / traj.mass[0]) - exponent)))


def inverse_mass_residual(traj: FilterTrajectory, innovation: np.ndarray) -> float:
    """sup_t |(pibar_t, 1)^-1 - exp(-sum P . dw-check - 1/2 sum |P|^2 dt)|, relative to the mass."""
    if not np.all(traj.mass > 0):
        raise MassCollapseError("Reciprocal mass needs positive mass throughout")
    inverse = traj.mass[0] / traj.mass
    predicted = np.exp(-_exponent_sums(traj, innovation))
    return float(np.max(np.abs(inverse - predicted) / inverse))


def holder_exponent(series: np.ndarray, levels: int | None = None) -> tuple[float, bool]:
    """
    Log-log slope of the sup-increment max_i |u[i + l] - u[i]| against the lag
    l over dyadic lags 1, 2, ..., 2^(levels - 1) (unit spacing; the slope is
    scale free).

    Returns:
        (exponent clipped to [0, cap], degenerate flag). A series without
        increments is reported as the cap with the flag set.
    """
    levels = levels or settings.HOLDER_LEVELS
    series = np.asarray(series, dtype=float)
    available = int(np.floor(np.log2(len(series) - 1))) + 1 if len(series) > 1 else 0
    levels = min(levels, available)
    if levels < MIN_HOLDER_LEVELS:
        raise InsufficientResolution(
            f"Only {levels} dyadic lag levels available, need {MIN_HOLDER_LEVELS}"
        )
    cap = settings.HOLDER_EXPONENT_CAP
    lags = 2 ** np.arange(levels)
    sup_increments = np.array([np.max(np.abs(series[lag:] - series[:-lag])) for lag in lags])
    scale = max(float(np.max(np.abs(series))), np.finfo(float).tiny)
    if np.any(sup_increments <= 1e-13 * scale):
        return cap, True
    slope = float(np.polyfit(np.log(lags), np.log(sup_increments), 1)[0])
    return float(np.clip(slope, 0.0, cap)), False


def holder_exponents(traj: FilterTrajectory) -> HolderEstimate:
    """
    Fitted Hölder exponents of pibar in t (peak-node time series) and in x
    (final field along the first axis through the peak node).
    """
    alpha_t, t_flag = holder_exponent(traj.peak_values)
    final = traj.final.pibar.values
    index = list(traj.peak_index)
    index[0] = slice(None)
    alpha_x, x_flag = holder_exponent(final[tuple(index)])
    return HolderEstimate(alpha_t=alpha_t, alpha_x=alpha_x, t_degenerate=t_flag, x_degenerate=x_flag)


def sobolev_norm(state: FilterState, p: float) -> float:
    """
    Discrete W^1_p norm (sum |u|^p h^d)^(1/p) + (sum |grad_h u|^p h^d)^(1/p),
    centred gradients (one-sided at the faces).
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    grid = state.grid
    u = state.pibar.values
    gradient = np.gradient(u, *grid.h) if grid.d > 1 else [np.gradient(u, grid.h[0])]
    magnitude = np.sqrt(sum(g**2 for g in gradient))
    volume = grid.cell_volume
    return float((np.sum(np.abs(u) ** p) * volume) ** (1 / p) + (np.sum(magnitude**p) * volume) ** (1 / p))


class L1Stability(NamedTuple):
    sensitivity: float
    domination: float


def l1_stability(
    traj_a: FilterTrajectory,
    traj_b: FilterTrajectory,
    traj_gap: FilterTrajectory,
) -> L1Stability:
    """
    Continuity of pibar in its initial density, at the common snapshots.

    traj_a and traj_b start from two initial densities, traj_gap from
    |pi_0^a - pi_0^b|. By linearity pibar^a - pibar^b solves the same equation,
    so a positivity-preserving scheme keeps |pibar^a_t - pibar^b_t|_L1 under
    the mass of traj_gap.

    Returns:
        sensitivity: sup_t |pibar^a_t - pibar^b_t|_L1 / |pi_0^a - pi_0^b|_L1
        domination: sup_t |pibar^a_t - pibar^b_t|_L1 / (pibar^gap_t, 1), <= 1
            up to round-off for positive steps
    """
    steps = traj_a.snapshot_steps
    if traj_b.snapshot_steps != steps or traj_gap.snapshot_steps != steps:
        raise ValueError("Trajectories must share their snapshot steps")
    if not (traj_a.grid.same_as(traj_b.grid) and traj_a.grid.same_as(traj_gap.grid)):
        raise GridMismatch("Trajectories must share a grid")
    grid = traj_a.grid
    distances = np.array(
        [
            grid.integrate(np.abs(a.pibar.values - b.pibar.values))
            for a, b in zip(traj_a.snapshots, traj_b.snapshots)
        ]
    )
    if not distances[0] > 0.0:
        raise ValueError("Initial densities coincide")
    gap_mass = traj_gap.mass[list(steps)]
    result = L1Stability(
        sensitivity=float(np.max(distances) / distances[0]),
        domination=float(np.max(distances / gap_mass)),
    )
    logger.info(
        f"[DIAG] L1 stability: sensitivity={result.sensitivity:.4g} domination={result.domination:.6g}"
    )
    return result


def martingale_check(samples: Sequence[float]) -> MartingaleCheck:
    """Sample mean of a quantity with expectation one and its z-score."""
    values = np.asarray(samples, dtype=float)
    if len(values) < 2:
        raise InsufficientResolution("Need at least two samples")
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(len(values)))
    z = (mean - 1.0) / stderr if stderr > 0 else 0.0
    return MartingaleCheck(mean=mean, stderr=stderr, z=float(z))


def mass_moment_summary(trajectories: Sequence[FilterTrajectory], m: float = 2.0) -> dict[str, float]:
    """Sample E sup_t (pibar_t,1)^m and E sup_t (pibar_t,1)^-m over runs."""
    sup_mass = np.array([traj.mass.max() for traj in trajectories])
    sup_inverse = np.array([(1.0 / traj.mass).max() for traj in trajectories])
    return {
        "moment": m,
        "runs": len(trajectories),
        "mean_sup_mass_pow": float(np.mean(sup_mass**m)),
        "mean_sup_inverse_mass_pow": float(np.mean(sup_inverse**m)),
        "max_sup_mass": float(sup_mass.max()),
        "max_sup_inverse_mass": float(sup_inverse.max()),
    }


def holder_moment_summary(estimates: Sequence[HolderEstimate]) -> dict[str, float]:
    """Mean and standard deviation of fitted exponents over seeds."""
    alpha_t = np.array([e.alpha_t for e in estimates])
    alpha_x = np.array([e.alpha_x for e in estimates])
    return {
        "runs": len(estimates),
        "alpha_t_mean": float(alpha_t.mean()),
        "alpha_t_std": float(alpha_t.std()),
        "alpha_x_mean": float(alpha_x.mean()),
        "alpha_x_std": float(alpha_x.std()),
    }


def diagnose(
    traj: FilterTrajectory,
    path: PathSample | None,
    spec: SystemSpec,
    *,
    seed: int | None = None,
    real_data: bool = False,
) -> DiagnosticsReport:
    """
    Full diagnostics report for one run. In real-data mode (or without a
    path) the Wiener path is unobservable and the mass identity is reported
    as unavailable.
    """
    innovation = innovation_path(traj)
    innovation_stats = innovation_tests(innovation, traj.dt)
    holder = holder_exponents(traj)

    mass_residual = None
    if not real_data and path is not None:
        mass_residual = mass_identity_residual(traj, path, spec)

    w1p = {str(p): [sobolev_norm(state, p) for state in traj.snapshots] for p in (2, 4)}
    report = DiagnosticsReport(
        seed=seed,
        real_data=real_data or path is None,
        mass_residual_sup=mass_residual,
        exp_mass_residual_sup=exponential_mass_residual(traj, innovation),
        inverse_mass_residual_sup=inverse_mass_residual(traj, innovation),
        innovation_qv_error=innovation_stats.qv_error,
        innovation_mean_z=innovation_stats.mean_z,
        holder_t_exponent=holder.alpha_t,
        holder_x_exponent=holder.alpha_x,
        holder_t_degenerate=holder.t_degenerate,
        holder_x_degenerate=holder.x_degenerate,
        min_density_ratio=float(np.min(traj.min_value / traj.max_value)),
        mass_sup=float(traj.mass.max()),
        mass_inf=float(traj.mass.min()),
        w1p_times=[float(state.t) for state in traj.snapshots],
        w1p_norm_series=w1p,
    )
    logger.info(
        f"[DIAG] seed={seed} qv_error={report.innovation_qv_error:.3g} "
        f"mean_z={report.innovation_mean_z:.3g} exp_residual={report.exp_mass_residual_sup:.3e}"
    )
    return report
