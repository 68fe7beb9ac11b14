"""
Euler-Maruyama simulation of the signal/observation system and the
auxiliary processes built from a path (w~, w^, rho).
"""

import logging
from typing import NamedTuple

import numpy as np

from app.config import settings
from app.errors import BlowupError, ConfigError
from app.models import PathSample, SystemSpec
from app.services.model import compute_psi

# Configure logging
logger = logging.getLogger(__name__)


class DerivedWieners(NamedTuple):
    """Per-step increments of w~ = int Psi Theta dw and w^ = int Psi dy, plus beta(x_k)."""

    w_tilde: np.ndarray
    w_hat: np.ndarray
    beta: np.ndarray


def mesh_steps(T: float, dt: float) -> int:
    """Number of steps of size dt in [0, T]; T/dt must be integral."""
    if dt <= 0:
        raise ConfigError(f"time.dt must be positive, got {dt}")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ConfigError(f"time.dt={dt} does not divide the horizon T={T} into whole steps")
    return steps


def simulate_from_increments(
    spec: SystemSpec,
    dt: float,
    dw: np.ndarray,
    x0: np.ndarray,
    seed: int = 0,
) -> PathSample:
    """
    Euler-Maruyama recursion z_{k+1} = z_k + b~(t_k, z_k) dt + theta~(t_k, z_k) dw_k
    for given Wiener increments and initial signal value.
    """
    dw = np.asarray(dw, dtype=float)
    steps = dw.shape[0]
    z = np.empty((steps + 1, spec.d1))
    z[0, : spec.d] = x0
    z[0, spec.d:] = spec.y0
    times = dt * np.arange(steps + 1)

    for k in range(steps):
        t = times[k]
        z[k + 1] = z[k] + spec.drift(t, z[k]) * dt + spec.diffusion(t, z[k]) @ dw[k]
        if not np.all(np.abs(z[k + 1]) <= settings.SIM_GUARD_RADIUS):
            raise BlowupError(
                f"State left guard radius {settings.SIM_GUARD_RADIUS:.0e} at t={times[k + 1]:.6g}"
            )

    return PathSample(dt=dt, times=times, w=dw, z=z, d=spec.d, seed=seed)


def _draw(spec: SystemSpec, steps: int, dt: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x0 = spec.pi0.sample(rng, 1)[0]
    dw = rng.standard_normal((steps, spec.d2)) * np.sqrt(dt)
    return x0, dw


def simulate_system(spec: SystemSpec, dt: float, seed: int) -> PathSample:
    """
    Simulate one path of (w, z) on the uniform mesh of step dt.

    Args:
        spec: system specification
        dt: time step; spec.T / dt must be an integer
        seed: RNG seed (x_0 is drawn first, then the Wiener increments)

    Returns:
        PathSample, bit-identical for identical (spec, dt, seed)
    """
    steps = mesh_steps(spec.T, dt)
    x0, dw = _draw(spec, steps, dt, seed)
    path = simulate_from_increments(spec, dt, dw, x0, seed)
    logger.debug(f"[SIM] {spec.name}: seed={seed} steps={steps} z_T={path.z[-1]}")
    return path


def coarsen(spec: SystemSpec, path: PathSample) -> PathSample:
    """Re-simulate on step 2 dt with pairwise-summed increments of the same Brownian path."""
    if path.steps % 2:
        raise ConfigError("Coarsening needs an even number of steps")
    dw = path.w[0::2] + path.w[1::2]
    return simulate_from_increments(spec, 2.0 * path.dt, dw, path.x[0], path.seed)


def simulate_batch(spec: SystemSpec, dt: float, seeds: list[int]) -> np.ndarray:
    """
    Terminal states z_T for many seeds, vectorized across paths.

    Path i uses exactly the draws of simulate_system(spec, dt, seeds[i]).
    """
    steps = mesh_steps(spec.T, dt)
    draws = [_draw(spec, steps, dt, seed) for seed in seeds]
    x0 = np.stack([x for x, _ in draws])
    dw = np.stack([w for _, w in draws], axis=1)

    z = np.empty((len(seeds), spec.d1))
    z[:, : spec.d] = x0
    z[:, spec.d:] = spec.y0
    for k in range(steps):
        t = k * dt
        noise = np.einsum("pij,pj->pi", spec.diffusion(t, z), dw[k])
        z = z + spec.drift(t, z) * dt + noise
    if not np.all(np.abs(z) <= settings.SIM_GUARD_RADIUS):
        raise BlowupError(f"Batch state left guard radius {settings.SIM_GUARD_RADIUS:.0e}")
    return z


def derived_wieners(path: PathSample, spec: SystemSpec) -> DerivedWieners:
    """
    Increments dw^_k = Psi_k dy_k and dw~_k = Psi_k Theta_k dw_k, with
    Psi_k, Theta_k evaluated at (t_k, y_k). Along an Euler path
    dw^_k = beta_k(x_k) dt + dw~_k holds to rounding.
    """
    steps = path.steps
    w_hat = np.empty((steps, spec.m))
    w_tilde = np.empty((steps, spec.m))
    beta = np.empty((steps, spec.m))
    dy = path.dy
    for k in range(steps):
        t, z = path.times[k], path.z[k]
        psi = compute_psi(spec, t, z[spec.d:])
        w_hat[k] = psi @ dy[k]
        w_tilde[k] = psi @ (spec.Theta_z(t, z) @ path.w[k])
        beta[k] = psi @ spec.B(t, z)
    return DerivedWieners(w_tilde=w_tilde, w_hat=w_hat, beta=beta)


def likelihood_rho(path: PathSample, spec: SystemSpec) -> np.ndarray:
    """
    rho_t = exp(-int beta~ dw~ - 1/2 int |beta~|^2 ds) at every mesh point,
    with left-point (Ito) sums and beta~_s = beta_s(x_s).
    """
    derived = derived_wieners(path, spec)
    exponent = -np.sum(derived.beta * derived.w_tilde, axis=1) - 0.5 * np.sum(
        derived.beta**2, axis=1
    ) * path.dt
    return np.exp(np.concatenate([[0.0], np.cumsum(exponent)]))
