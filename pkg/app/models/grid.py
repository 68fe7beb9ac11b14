"""
Spatial grid, density fields and filter states.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from app.config import settings
from app.errors import GridError, GridMismatch, MassCollapseError


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform node-centred grid on a box in R^d.

    Node j along axis i sits at lower[i] + j * h[i]; the trapezoid weights
    are the volumes of the dual cells (half cells on the box faces).

    Attributes:
        lower: lower corner per axis
        h: spacing per axis
        nodes: node count per axis
    """

    lower: tuple[float, ...]
    h: tuple[float, ...]
    nodes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.lower) == len(self.h) == len(self.nodes)):
            raise GridError("lower, h and nodes must have one entry per axis")
        if any(step <= 0 for step in self.h):
            raise GridError(f"Grid spacing must be positive, got h={self.h}")
        if any(count < settings.GRID_MIN_NODES for count in self.nodes):
            raise GridError(
                f"Need at least {settings.GRID_MIN_NODES} nodes per axis, got {self.nodes}"
            )

    @classmethod
    def symmetric(cls, d: int, R: float, h: float) -> "GridSpec":
        """Grid on [-R, R]^d with spacing h (R/h rounded to whole cells)."""
        cells = int(round(2.0 * R / h))
        if abs(cells * h - 2.0 * R) > 1e-9 * R:
            raise GridError(f"2R={2 * R} is not a whole number of cells of size h={h}")
        return cls(lower=(-R,) * d, h=(h,) * d, nodes=(cells + 1,) * d)

    @property
    def d(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return int(np.prod(self.nodes))

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(lo + (n - 1) * step for lo, n, step in zip(self.lower, self.nodes, self.h))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            lo + step * np.arange(n) for lo, step, n in zip(self.lower, self.h, self.nodes)
        )

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape (*nodes, d)."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights, shape nodes."""
        result = np.ones(self.nodes)
        for axis, (step, n) in enumerate(zip(self.h, self.nodes)):
            w = np.full(n, step)
            w[[0, -1]] = step / 2.0
            shape = [1] * self.d
            shape[axis] = n
            result = result * w.reshape(shape)
        return result

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid quadrature of a field over the box."""
        return float(np.sum(self.weights * values))

    def covers(self, box: np.ndarray, margin: float = 0.0) -> bool:
        box = np.asarray(box, dtype=float)
        return bool(
            np.all(np.asarray(self.lower) <= box[:, 0] - margin)
            and np.all(np.asarray(self.upper) >= box[:, 1] + margin)
        )

    def nearest_index(self, x: np.ndarray) -> tuple[int, ...]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return tuple(
            int(np.clip(round((xi - lo) / step), 0, n - 1))
            for xi, lo, step, n in zip(x, self.lower, self.h, self.nodes)
        )

    def same_as(self, other: "GridSpec") -> bool:
        return (
            self.nodes == other.nodes
            and np.allclose(self.lower, other.lower, rtol=0, atol=1e-12)
            and np.allclose(self.h, other.h, rtol=0, atol=1e-12)
        )


@dataclass(frozen=True, eq=False)
class DensityField:
    """
    Grid values of a (possibly unnormalized) density.

    Attributes:
        values: array of shape grid.nodes
        grid: the grid the values live on
        mass: trapezoid integral of values
        min_value: array minimum
        max_value: array maximum
    """

    values: np.ndarray
    grid: GridSpec
    mass: float = field(init=False)
    min_value: float = field(init=False)
    max_value: float = field(init=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.nodes:
            raise GridMismatch(f"Field shape {values.shape} does not match grid {self.grid.nodes}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mass", self.grid.integrate(values))
        object.__setattr__(self, "min_value", float(values.min()))
        object.__setattr__(self, "max_value", float(values.max()))

    def integrate(self, f: np.ndarray) -> float:
        """Quadrature of f * values; f broadcast against the grid shape."""
        return self.grid.integrate(np.asarray(f) * self.values)

    def scaled(self, factor: float) -> "DensityField":
        return DensityField(self.values * factor, self.grid)


@dataclass(frozen=True, eq=False)
class FilterState:
    """
    Filter at time t: the unnormalized density and its normalization
    pi_t = pibar_t / (pibar_t, 1).
    """

    t: float
    pibar: DensityField
    normalized: DensityField

    @classmethod
    def from_values(cls, t: float, values: np.ndarray, grid: GridSpec) -> "FilterState":
        pibar = DensityField(values, grid)
        if not pibar.mass > settings.MASS_COLLAPSE_FLOOR:
            raise MassCollapseError(f"Mass {pibar.mass:.3e} at t={t:.6g} below collapse floor")
        return cls(t=t, pibar=pibar, normalized=pibar.scaled(1.0 / pibar.mass))

    @property
    def grid(self) -> GridSpec:
        return self.pibar.grid


@dataclass(frozen=True, eq=False)
class FilterTrajectory:
    """
    Output of a Zakai solve along one observation path.

    Attributes:
        grid: spatial grid
        dt: time step
        times: mesh points, shape (n + 1,)
        mass: (pibar_t, 1) at every mesh point
        min_value, max_value: extrema of pibar_t at every mesh point
        p_beta: P_t[beta] at every mesh point, shape (n + 1, m)
        w_hat: increments Psi_k dy_k used by the solver, shape (n, m)
        peak_index: grid node of the peak series
        peak_values: pibar_t at the peak node, shape (n + 1,)
        snapshots: filter states at the snapshot cadence (first and last included)
        snapshot_steps: mesh indices of the snapshots
    """

    grid: GridSpec
    dt: float
    times: np.ndarray
    mass: np.ndarray
    min_value: np.ndarray
    max_value: np.ndarray
    p_beta: np.ndarray
    w_hat: np.ndarray
    peak_index: tuple[int, ...]
    peak_values: np.ndarray
    snapshots: tuple[FilterState, ...]
    snapshot_steps: tuple[int, ...]

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def final(self) -> FilterState:
        return self.snapshots[-1]

    @property
    def m(self) -> int:
        return self.p_beta.shape[1]
