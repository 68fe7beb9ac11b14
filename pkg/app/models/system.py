"""
Partially observable system: coefficients, initial density and the
observation-conditioned coefficient fields derived from them.
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import stats

# (t, z) -> array. z has shape (..., d1) (or (..., d1 - d) for Theta).
CoefficientFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class InitialDensity:
    """
    Nonrandom initial density pi_0 of the signal.

    Attributes:
        kind: "gaussian" or "tent" (product of 1-d triangular densities)
        center: mean of the Gaussian, or the tent center
        cov: covariance matrix (gaussian only)
        width: half-width of the tent per axis (tent only)
    """

    kind: Literal["gaussian", "tent"]
    center: np.ndarray
    cov: np.ndarray | None = None
    width: np.ndarray | None = None

    @classmethod
    def gaussian(cls, mean, cov) -> "InitialDensity":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(kind="gaussian", center=mean, cov=cov)

    @classmethod
    def tent(cls, center, width) -> "InitialDensity":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        width = np.broadcast_to(np.asarray(width, dtype=float), center.shape).copy()
        return cls(kind="tent", center=center, width=width)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def is_product(self) -> bool:
        """True when the density factorizes over the coordinate axes."""
        if self.kind == "tent":
            return True
        off_diagonal = self.cov - np.diag(np.diag(self.cov))
        return bool(np.all(off_diagonal == 0.0))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Evaluate pi_0 at points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            values = stats.multivariate_normal(self.center, self.cov).pdf(x)
            return np.reshape(values, x.shape[:-1])
        scaled = np.abs(x - self.center) / self.width
        return np.prod(np.clip(1.0 - scaled, 0.0, None) / self.width, axis=-1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """
        Draw n initial signal values.

        Product densities are sampled by inverse CDF along each axis;
        correlated Gaussians through the Cholesky factor of the covariance.
        """
        if self.kind == "gaussian" and not self.is_product:
            chol = np.linalg.cholesky(self.cov)
            return self.center + rng.standard_normal((n, self.dim)) @ chol.T
        u = rng.random((n, self.dim))
        if self.kind == "gaussian":
            return self.center + np.sqrt(np.diag(self.cov)) * stats.norm.ppf(u)
        # Inverse CDF of the symmetric triangular density on [c - w, c + w]
        lower = np.sqrt(2.0 * u) - 1.0
        upper = 1.0 - np.sqrt(2.0 * (1.0 - u))
        return self.center + self.width * np.where(u < 0.5, lower, upper)

    def support_box(self) -> np.ndarray:
        """Region (d, 2) carrying essentially all of the mass."""
        if self.kind == "gaussian":
            radius = 5.0 * np.sqrt(np.diag(self.cov))
        else:
            radius = self.width
        return np.stack([self.center - radius, self.center + radius], axis=1)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """
    The coupled signal/observation diffusion

        dx = b(t, z) dt + theta(t, z) dw,   dy = B(t, z) dt + Theta(t, y) dw,

    with z = (x, y), x in R^d, y in R^(d1 - d) and w a d2-dimensional Wiener
    process. Coefficient callables are vectorized over leading axes.

    Attributes:
        d, d1, d2: signal, state and Wiener dimensions
        b, theta, B, Theta: coefficient functions
        K: Lipschitz constant
        delta: nondegeneracy constant
        T: horizon
        pi0: initial density of x_0
        bound: declared sup of |b|, |theta|, |B|, |Theta| over the scenario box
            (settings.COEFFICIENT_BOUND when None)
        y0: fixed initial observation
        static_conditioning: coefficients ignore t and y, so conditioned
            fields are the same at every step
        name: label used in logs and artifacts
    """

    d: int
    d1: int
    d2: int
    b: CoefficientFn
    theta: CoefficientFn
    B: CoefficientFn
    Theta: CoefficientFn
    K: float
    delta: float
    T: float
    pi0: InitialDensity
    y0: np.ndarray = field(default_factory=lambda: np.zeros(1))
    bound: float | None = None
    static_conditioning: bool = False
    name: str = "system"

    def __post_init__(self) -> None:
        if self.d < 1 or self.d1 <= self.d or self.d2 < self.d1:
            raise ValueError(
                f"Invalid dimensions d={self.d}, d1={self.d1}, d2={self.d2}: "
                "need d >= 1, d1 > d, d2 >= d1"
            )
        if self.delta <= 0 or self.T <= 0 or self.K <= 0:
            raise ValueError("K, delta and T must be positive")
        if self.pi0.dim != self.d:
            raise ValueError(f"pi0 has dimension {self.pi0.dim}, expected {self.d}")
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        if y0.shape != (self.m,):
            y0 = np.broadcast_to(y0, (self.m,)).copy()
        object.__setattr__(self, "y0", y0)

    @property
    def m(self) -> int:
        """Observation dimension d1 - d."""
        return self.d1 - self.d

    def Theta_z(self, t: float, z: np.ndarray) -> np.ndarray:
        """Theta viewed as a function of the full state; only y is read."""
        return self.Theta(t, np.asarray(z)[..., self.d:])

    def drift(self, t: float, z: np.ndarray) -> np.ndarray:
        """Full drift b~ = (b, B), shape (..., d1)."""
        return np.concatenate([self.b(t, z), self.B(t, z)], axis=-1)

    def diffusion(self, t: float, z: np.ndarray) -> np.ndarray:
        """Full diffusion theta~ = (theta; Theta), shape (..., d1, d2)."""
        theta = self.theta(t, z)
        Theta = np.broadcast_to(self.Theta_z(t, z), theta.shape[:-2] + (self.m, self.d2))
        return np.concatenate([theta, Theta], axis=-2)


@dataclass(frozen=True, eq=False)
class ConditionedCoefficients:
    """
    Coefficient fields of the filtering equation at a fixed (t, y_t),
    sampled on the grid nodes (leading axes = grid shape).

    Attributes:
        t: time
        y: observation used for conditioning
        a: 1/2 theta theta*, shape (*nodes, d, d)
        b_vec: signal drift, shape (*nodes, d)
        sigma: theta Theta* Psi, shape (*nodes, d, m)
        beta: Psi B, shape (*nodes, m)
        psi: (Theta Theta*)^(-1/2) at (t, y), shape (m, m)
        div_a: D_i a^{ij}, shape (*nodes, d)
        div_sigma: D_i sigma^{ik}, shape (*nodes, m)
    """

    t: float
    y: np.ndarray
    a: np.ndarray
    b_vec: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    psi: np.ndarray
    div_a: np.ndarray
    div_sigma: np.ndarray

    @property
    def m(self) -> int:
        return self.beta.shape[-1]
