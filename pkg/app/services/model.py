"""
System model services: observation-noise square root, conditioned
coefficient fields, sampled assumption checks and mollification.
"""

import logging
from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy import integrate

from app.config import settings
from app.errors import EvaluationError, QuadratureError, SingularObservationNoise
from app.models import ConditionedCoefficients, GridSpec, SystemSpec
from app.schemas.reports import AssumptionReport

# Configure logging
logger = logging.getLogger(__name__)

COEFFICIENT_NAMES = ("b", "theta", "B", "Theta")

# Points evaluated per chunk by the mollified coefficient
MOLLIFIER_CHUNK = 1 << 20


def _sym(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + np.swapaxes(matrix, -1, -2))


def psi_from_theta(Theta: np.ndarray) -> np.ndarray:
    """
    Inverse symmetric square root (Theta Theta*)^(-1/2) via a symmetric
    eigendecomposition. Works on stacks of shape (..., m, d2).

    Raises:
        SingularObservationNoise: smallest eigenvalue of Theta Theta* below
            the floor, or the identity Psi Theta Theta* Psi = I fails
    """
    gram = _sym(Theta @ np.swapaxes(Theta, -1, -2))
    eigvals, eigvecs = np.linalg.eigh(gram)
    smallest = float(eigvals.min())
    if smallest < settings.PSI_EIGEN_FLOOR:
        raise SingularObservationNoise(
            f"Theta Theta* has eigenvalue {smallest:.3e} < {settings.PSI_EIGEN_FLOOR:.0e}"
        )
    psi = _sym((eigvecs * eigvals[..., None, :] ** -0.5) @ np.swapaxes(eigvecs, -1, -2))

    identity = np.eye(gram.shape[-1])
    defect = float(np.max(np.abs(psi @ gram @ psi - identity)))
    if defect > settings.PSI_IDENTITY_TOL:
        raise SingularObservationNoise(f"Psi Theta Theta* Psi deviates from I by {defect:.3e}")
    return psi


def compute_psi(spec: SystemSpec, t: float, y: np.ndarray) -> np.ndarray:
    """
    Psi(t, y) = (Theta Theta*)^(-1/2).

    Args:
        spec: system specification
        t: time
        y: observation value, shape (d1 - d,)

    Returns:
        Symmetric (d1 - d) x (d1 - d) matrix
    """
    Theta = np.asarray(spec.Theta(t, np.asarray(y, dtype=float)), dtype=float)
    if not np.all(np.isfinite(Theta)):
        raise EvaluationError(f"Theta returned non-finite values at t={t}")
    return psi_from_theta(Theta)


def condition_coefficients(
    spec: SystemSpec,
    t: float,
    y: np.ndarray,
    grid: GridSpec,
) -> ConditionedCoefficients:
    """
    Sample a, b, sigma, beta and Psi on the grid with the observation frozen
    at y, and differentiate a and sigma by central differences (one-sided at
    the box faces).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    shape = grid.nodes
    points = grid.points.reshape(-1, grid.d)
    z = np.concatenate([points, np.broadcast_to(y, (points.shape[0], spec.m))], axis=1)

    theta = np.asarray(spec.theta(t, z), dtype=float)
    b_vec = np.asarray(spec.b(t, z), dtype=float)
    B = np.asarray(spec.B(t, z), dtype=float)
    for name, values in (("theta", theta), ("b", b_vec), ("B", B)):
        if not np.all(np.isfinite(values)):
            raise EvaluationError(f"Coefficient {name} returned non-finite values at t={t}")

    psi = compute_psi(spec, t, y)
    Theta = np.asarray(spec.Theta(t, y), dtype=float)

    a = 0.5 * theta @ np.swapaxes(theta, -1, -2)
    sigma = theta @ Theta.T @ psi
    beta = B @ psi

    a = a.reshape(shape + a.shape[-2:])
    sigma = sigma.reshape(shape + sigma.shape[-2:])

    div_a = np.zeros(shape + (grid.d,))
    div_sigma = np.zeros(shape + (spec.m,))
    for i, step in enumerate(grid.h):
        div_a += np.gradient(a[..., i, :], step, axis=i)
        div_sigma += np.gradient(sigma[..., i, :], step, axis=i)

    return ConditionedCoefficients(
        t=t,
        y=y,
        a=a,
        b_vec=b_vec.reshape(shape + (grid.d,)),
        sigma=sigma,
        beta=beta.reshape(shape + (spec.m,)),
        psi=psi,
        div_a=div_a,
        div_sigma=div_sigma,
    )


def verify_assumptions(
    spec: SystemSpec,
    box: np.ndarray,
    n_samples: int,
    seed: int,
) -> AssumptionReport:
    """
    Check the standing assumptions by random sampling over box x [0, T].

    Lipschitz constants are the largest difference quotient over point pairs
    (half far apart, half at short range); eigenvalue bounds are exact at each
    sampled point.

    Args:
        spec: system specification
        box: (d1, 2) bounds for z
        n_samples: number of sampled points (>= 2)
        seed: RNG seed

    Returns:
        AssumptionReport with pass flags compared against spec.K, spec.delta and
        the declared coefficient bound
    """
    box = np.asarray(box, dtype=float)
    if box.shape != (spec.d1, 2) or np.any(box[:, 1] < box[:, 0]):
        raise ValueError(f"box must be a bounded ({spec.d1}, 2) region")
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")

    rng = np.random.default_rng(seed)
    lower, width = box[:, 0], box[:, 1] - box[:, 0]
    z1 = lower + width * rng.random((n_samples, spec.d1))
    far = lower + width * rng.random((n_samples, spec.d1))
    direction = rng.standard_normal((n_samples, spec.d1))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    near = z1 + 1e-3 * max(float(width.max()), 1.0) * direction
    z2 = np.where((np.arange(n_samples) % 2 == 0)[:, None], far, near)

    coefficients = {"b": spec.b, "theta": spec.theta, "B": spec.B, "Theta": spec.Theta_z}
    lipschitz = dict.fromkeys(COEFFICIENT_NAMES, 0.0)
    bound = 0.0
    min_atilde = np.inf
    min_a = np.inf
    psi_bound = 0.0
    projector = np.inf

    n_slices = min(n_samples, 8)
    slices = np.array_split(np.arange(n_samples), n_slices)
    for t, idx in zip(np.linspace(0.0, spec.T, n_slices), slices):
        za, zb = z1[idx], z2[idx]
        distance = np.linalg.norm(za - zb, axis=1)
        for name, fn in coefficients.items():
            va = np.asarray(fn(t, za), dtype=float).reshape(len(idx), -1)
            vb = np.asarray(fn(t, zb), dtype=float).reshape(len(idx), -1)
            quotient = np.linalg.norm(va - vb, axis=1) / distance
            lipschitz[name] = max(lipschitz[name], float(np.max(quotient)))
            bound = max(bound, float(np.max(np.abs(va))))

        theta_full = spec.diffusion(t, za)
        atilde = 0.5 * theta_full @ np.swapaxes(theta_full, -1, -2)
        min_atilde = min(min_atilde, float(np.linalg.eigvalsh(_sym(atilde)).min()))

        theta = theta_full[:, : spec.d, :]
        Theta = theta_full[:, spec.d:, :]
        a = 0.5 * theta @ np.swapaxes(theta, -1, -2)
        min_a = min(min_a, float(np.linalg.eigvalsh(_sym(a)).min()))

        gram = _sym(Theta @ np.swapaxes(Theta, -1, -2))
        gram_min = float(np.linalg.eigvalsh(gram).min())
        psi_bound = max(psi_bound, max(gram_min, settings.PSI_EIGEN_FLOOR) ** -0.5)

        psi_sq = np.linalg.pinv(gram, hermitian=True)
        complement = np.eye(spec.d2) - np.swapaxes(Theta, -1, -2) @ psi_sq @ Theta
        form = _sym(theta @ complement @ np.swapaxes(theta, -1, -2))
        projector = min(projector, float(np.linalg.eigvalsh(form).min()))

    tol = settings.ASSUMPTION_TOL
    declared_bound = settings.COEFFICIENT_BOUND if spec.bound is None else spec.bound
    flags = {
        "pass_lipschitz": all(value <= spec.K + tol for value in lipschitz.values()),
        "pass_bounded": bool(np.isfinite(bound)) and bound <= declared_bound + tol,
        "pass_nondegenerate": min_atilde >= spec.delta - tol,
        "pass_psi": psi_bound <= 1.0 / spec.delta + tol,
        "pass_projector": projector >= spec.delta - tol,
    }
    report = AssumptionReport(
        K=spec.K,
        delta=spec.delta,
        n_samples=n_samples,
        lipschitz_estimate=lipschitz,
        coefficient_bound=bound if np.isfinite(bound) else float(np.finfo(float).max),
        declared_bound=declared_bound,
        min_eigen_atilde=min_atilde,
        min_eigen_a=min_a,
        psi_norm_bound=psi_bound,
        projector_bound=projector,
        passed=all(flags.values()),
        **flags,
    )
    logger.info(
        f"[MODEL] Assumptions for {spec.name}: passed={report.passed} "
        f"min_eig(atilde)={min_atilde:.4g} projector={projector:.4g} "
        f"lipschitz={ {k: round(v, 4) for k, v in lipschitz.items()} }"
    )
    return report


def _bump(s: np.ndarray, radius: float) -> np.ndarray:
    u = np.asarray(s, dtype=float) / radius
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@lru_cache(maxsize=8)
def mollifier_rule(d1: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Quadrature rule for the fixed mollifier zeta on R^d1: a product of 1-d
    smooth bumps, each supported on |s| < 1/sqrt(d1) so that the product is
    supported in the unit ball.

    Returns:
        (offsets of shape (nodes**d1, d1), weights summing to one)

    Raises:
        QuadratureError: the 1-d trapezoid sum misses the reference integral
            by more than MOLLIFIER_TOL (relative)
    """
    radius = 1.0 / np.sqrt(d1)
    reference, _ = integrate.quad(_bump, -radius, radius, args=(radius,), epsabs=1e-15, epsrel=1e-13)
    s = np.linspace(-radius, radius, nodes + 2)[1:-1]
    w = _bump(s, radius) * (s[1] - s[0])
    defect = abs(w.sum() - reference) / reference
    if defect > settings.MOLLIFIER_TOL:
        raise QuadratureError(
            f"Mollifier quadrature with {nodes} nodes misses normalization by {defect:.2e}"
        )
    w = w / w.sum()

    offsets = np.stack(np.meshgrid(*([s] * d1), indexing="ij"), axis=-1).reshape(-1, d1)
    weights = np.prod(np.stack(np.meshgrid(*([w] * d1), indexing="ij"), axis=-1), axis=-1).ravel()
    return offsets, weights / weights.sum()


class MollifiedCoefficient:
    """theta^(n)(t, z) = (zeta_n * theta)(t, z), evaluated by quadrature."""

    def __init__(self, base, n: int, offsets: np.ndarray, weights: np.ndarray) -> None:
        self.base = base
        self.n = n
        self.offsets = offsets / n
        self.weights = weights

    def __call__(self, t: float, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        lead = z.shape[:-1]
        flat = z.reshape(-1, z.shape[-1])
        chunk = max(1, MOLLIFIER_CHUNK // len(self.weights))
        parts = []
        for start in range(0, flat.shape[0], chunk):
            block = flat[start:start + chunk]
            shifted = block[:, None, :] - self.offsets[None, :, :]
            values = np.asarray(self.base(t, shifted), dtype=float)
            parts.append(np.tensordot(values, self.weights, axes=([1], [0])))
        result = np.concatenate(parts, axis=0)
        return result.reshape(lead + result.shape[1:])

    def depends_on(self, start: int, stop: int) -> bool:
        depends = getattr(self.base, "depends_on", None)
        return True if depends is None else bool(depends(start, stop))


def mollify_theta(spec: SystemSpec, n: int) -> SystemSpec:
    """
    Replace theta by its mollification zeta_n * theta (convolution in z);
    every other coefficient is unchanged.
    """
    if n < 1:
        raise ValueError(f"Mollification index must be >= 1, got {n}")
    offsets, weights = mollifier_rule(spec.d1, settings.MOLLIFIER_NODES)
    logger.info(f"[MODEL] Mollifying theta of {spec.name} with n={n} ({len(weights)} nodes)")
    return replace(
        spec,
        theta=MollifiedCoefficient(spec.theta, n, offsets, weights),
        name=f"{spec.name}-mollified-{n}",
    )


def mollification_error(
    spec: SystemSpec,
    n: int,
    box: np.ndarray,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """
    Sampled sup |theta^(n) - theta| over box and the implied constant n * sup.
    """
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    z = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n_samples, spec.d1))
    t = spec.T * rng.random()
    smooth = mollify_theta(spec, n)
    distance = float(np.max(np.abs(smooth.theta(t, z) - spec.theta(t, z))))
    return distance, n * distance
