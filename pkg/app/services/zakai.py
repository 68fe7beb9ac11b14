"""
Finite-volume discretization of the divergence-form Zakai equation

    d pibar = L* pibar dt + Lambda^{k*} pibar dw^k,    dw^ = Psi dy,

with L* u = D_j(a^{ij} D_i u - b^j u + u D_i a^{ij}) and
Lambda^{k*} u = -D_i(sigma^{ik} u) + beta^k u,
on a truncated box with zero-flux faces. Time stepping is Lie splitting:
explicit stochastic substep, then implicit deterministic substep.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab, splu

from app.config import settings
from app.errors import AssemblyError, ConfigError, GridError, LinearSolveError, MassCollapseError
from app.models import (
    ConditionedCoefficients,
    FilterState,
    FilterTrajectory,
    GridSpec,
    PathSample,
    SystemSpec,
)
from app.services.diagnostics import L1Stability, l1_stability, p_beta
from app.services.model import condition_coefficients

# Configure logging
logger = logging.getLogger(__name__)

TimeScheme = Literal["backward_euler", "crank_nicolson"]
AdvectionScheme = Literal["upwind", "central"]


def _difference_1d(n: int, h: float) -> sp.csr_array:
    """Centred first difference, one-sided in the first and last rows."""
    interior = np.arange(1, n - 1)
    rows = np.concatenate([interior, interior, [0, 0, n - 1, n - 1]])
    cols = np.concatenate([interior - 1, interior + 1, [0, 1, n - 2, n - 1]])
    vals = np.concatenate(
        [np.full(n - 2, -0.5 / h), np.full(n - 2, 0.5 / h), [-1 / h, 1 / h, -1 / h, 1 / h]]
    )
    return sp.csr_array((vals, (rows, cols)), shape=(n, n))


def axis_difference(grid: GridSpec, axis: int) -> sp.csr_array:
    """D_axis on the flattened (C-order) grid."""
    factors = [
        _difference_1d(n, step) if i == axis else sp.eye_array(n, format="csr")
        for i, (n, step) in enumerate(zip(grid.nodes, grid.h))
    ]
    result = factors[0]
    for factor in factors[1:]:
        result = sp.kron(result, factor, format="csr")
    return sp.csr_array(result)


def _faces(grid: GridSpec, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices of the left and right node of every face normal to axis."""
    idx = np.arange(grid.size).reshape(grid.nodes)
    n = grid.nodes[axis]
    left = np.take(idx, np.arange(n - 1), axis=axis).ravel()
    right = np.take(idx, np.arange(1, n), axis=axis).ravel()
    return left, right


def _selector(rows_to_cols: np.ndarray, size: int) -> sp.csr_array:
    count = len(rows_to_cols)
    return sp.csr_array((np.ones(count), (np.arange(count), rows_to_cols)), shape=(count, size))


def _cell_widths(grid: GridSpec, axis: int) -> np.ndarray:
    n, step = grid.nodes[axis], grid.h[axis]
    widths = np.full(n, step)
    widths[[0, -1]] = step / 2.0
    shape = [1] * grid.d
    shape[axis] = n
    return np.broadcast_to(widths.reshape(shape), grid.nodes).ravel()


def assemble_deterministic_operator(
    coeffs: ConditionedCoefficients,
    grid: GridSpec,
    advection: AdvectionScheme | None = None,
) -> sp.csr_array:
    """
    Flux-form finite-volume matrix of L*.

    On each face normal to axis j the flux is
    a_face^{ij} D_i u + (div_a - b)^j_face u, with D_j u the two-point
    difference across the face, cross derivatives averaged from the
    neighbouring centred differences, and the transport term upwinded (or
    centred). Outer faces carry zero flux, so trapezoid-weighted column sums
    vanish and the operator conserves mass.

    Raises:
        AssemblyError: a face-averaged diffusion matrix is not positive definite
    """
    advection = advection or settings.ADVECTION_SCHEME
    N, d = grid.size, grid.d
    a = coeffs.a.reshape(N, d, d)
    transport = (coeffs.div_a - coeffs.b_vec).reshape(N, d)
    differences = [axis_difference(grid, i) for i in range(d)] if d > 1 else []

    operator = sp.csr_array((N, N))
    for j, step in enumerate(grid.h):
        left, right = _faces(grid, j)
        SL, SR = _selector(left, N), _selector(right, N)
        a_face = 0.5 * (a[left] + a[right])
        smallest = np.linalg.eigvalsh(0.5 * (a_face + np.swapaxes(a_face, -1, -2))).min()
        if not smallest > 0.0:
            raise AssemblyError(
                f"Face-averaged diffusion along axis {j} not positive definite (min eig {smallest:.3e})"
            )

        flux = sp.diags_array(a_face[:, j, j] / step) @ (SR - SL)
        average = 0.5 * (SL + SR)
        for i in range(d):
            if i != j:
                flux = flux + sp.diags_array(a_face[:, i, j]) @ (average @ differences[i])

        c_face = 0.5 * (transport[left, j] + transport[right, j])
        if advection == "upwind":
            flux = flux + sp.diags_array(np.maximum(c_face, 0.0)) @ SR
            flux = flux + sp.diags_array(np.minimum(c_face, 0.0)) @ SL
        else:
            flux = flux + sp.diags_array(c_face) @ average

        divergence = sp.diags_array(1.0 / _cell_widths(grid, j)) @ (SL.T - SR.T)
        operator = operator + divergence @ flux

    return sp.csr_array(operator)


def assemble_stochastic_operator(
    coeffs: ConditionedCoefficients,
    grid: GridSpec,
    k: int,
) -> sp.csr_array:
    """
    Flux-form finite-volume matrix of Lambda^{k*} u = -D_i(sigma^{ik} u) + beta^k u
    for channel k (0-based).

    The face flux is sigma_face u_face with both factors averaged from the two
    neighbouring nodes, on the same faces as L*. Outer faces carry zero flux,
    so the trapezoid integral of Lambda^{k*} u equals that of beta^k u exactly.
    """
    if not 0 <= k < coeffs.m:
        raise IndexError(f"Channel {k} out of range for {coeffs.m} observation channels")
    N = grid.size
    sigma = coeffs.sigma.reshape(N, grid.d, coeffs.m)[:, :, k]
    operator = sp.diags_array(coeffs.beta[..., k].ravel(), format="csr")
    for i in range(grid.d):
        if not np.any(sigma[:, i] != 0.0):
            continue
        left, right = _faces(grid, i)
        SL, SR = _selector(left, N), _selector(right, N)
        sigma_face = 0.5 * (sigma[left, i] + sigma[right, i])
        flux = sp.diags_array(sigma_face) @ (0.5 * (SL + SR))
        divergence = sp.diags_array(1.0 / _cell_widths(grid, i)) @ (SL.T - SR.T)
        operator = operator - divergence @ flux
    return sp.csr_array(operator)


class ImplicitSolver:
    """Solves (I - w dt L) u = (I + (1 - w) dt L) v, w = 1 (backward Euler) or 1/2."""

    def __init__(self, operator: sp.csr_array, dt: float, scheme: TimeScheme) -> None:
        self.dt = dt
        self.scheme = scheme
        weight = 1.0 if scheme == "backward_euler" else 0.5
        identity = sp.eye_array(operator.shape[0], format="csc")
        self.lhs = sp.csc_array(identity - weight * dt * operator)
        self.explicit = None if weight == 1.0 else sp.csr_array(identity + (1 - weight) * dt * operator)
        self.method = settings.LINEAR_SOLVER
        self._lu = splu(self.lhs) if self.method == "direct" and dt > 0 else None

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if self.dt == 0:
            return v.copy()
        rhs = v if self.explicit is None else self.explicit @ v
        if self._lu is not None:
            u = self._lu.solve(rhs)
        else:
            u, info = bicgstab(
                self.lhs,
                rhs,
                x0=v,
                rtol=settings.LINEAR_SOLVE_TOL,
                atol=0.0,
                maxiter=settings.LINEAR_SOLVE_MAXITER,
            )
            if info != 0:
                raise LinearSolveError(f"bicgstab did not converge (info={info})")

        scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
        residual = float(np.linalg.norm(self.lhs @ u - rhs)) / scale
        if not residual <= settings.LINEAR_SOLVE_TOL:
            raise LinearSolveError(f"Implicit substep residual {residual:.3e} exceeds tolerance")
        return u


@dataclass(eq=False)
class ZakaiOperators:
    """Assembled L* and Lambda^{k*} for one set of conditioned coefficients."""

    coeffs: ConditionedCoefficients
    deterministic: sp.csr_array
    stochastic: tuple[sp.csr_array, ...]
    _solvers: dict = field(default_factory=dict, repr=False)

    @classmethod
    def assemble(
        cls,
        coeffs: ConditionedCoefficients,
        grid: GridSpec,
        advection: AdvectionScheme | None = None,
    ) -> "ZakaiOperators":
        return cls(
            coeffs=coeffs,
            deterministic=assemble_deterministic_operator(coeffs, grid, advection),
            stochastic=tuple(assemble_stochastic_operator(coeffs, grid, k) for k in range(coeffs.m)),
        )

    def solver(self, dt: float, scheme: TimeScheme | None = None) -> ImplicitSolver:
        scheme = scheme or settings.TIME_SCHEME
        key = (dt, scheme)
        if key not in self._solvers:
            self._solvers[key] = ImplicitSolver(self.deterministic, dt, scheme)
        return self._solvers[key]


def _advance(
    state: FilterState,
    dt: float,
    dw_hat: np.ndarray,
    operators: ZakaiOperators,
    scheme: TimeScheme | None,
) -> FilterState:
    grid = state.grid
    u = state.pibar.values.ravel()
    v = u.copy()
    for k, Lambda in enumerate(operators.stochastic):
        v += (Lambda @ u) * dw_hat[k]
    u_next = operators.solver(dt, scheme)(v)
    return FilterState.from_values(state.t + dt, u_next.reshape(grid.nodes), grid)


def step(
    state: FilterState,
    dt: float,
    dy: np.ndarray,
    coeffs: ConditionedCoefficients,
    *,
    operators: ZakaiOperators | None = None,
    scheme: TimeScheme | None = None,
) -> FilterState:
    """
    Advance the filter by one mesh step.

    Args:
        state: filter at time t
        dt: step (0 disables the deterministic substep)
        dy: observation increment y_{t+dt} - y_t
        coeffs: coefficients conditioned at (t, y_t)
        operators: pre-assembled operators for coeffs (assembled if omitted)
        scheme: implicit scheme, default settings.TIME_SCHEME

    Returns:
        Filter state at t + dt with refreshed mass and normalization
    """
    operators = operators or ZakaiOperators.assemble(coeffs, state.grid)
    dw_hat = coeffs.psi @ np.atleast_1d(np.asarray(dy, dtype=float))
    return _advance(state, dt, dw_hat, operators, scheme)


def initial_field(spec: SystemSpec, grid: GridSpec, shift: np.ndarray | float = 0.0) -> np.ndarray:
    """pi_0(x - shift) sampled on the grid and rescaled to unit trapezoid mass."""
    values = spec.pi0.pdf(grid.points - np.asarray(shift, dtype=float))
    mass = grid.integrate(values)
    if not mass > 0:
        raise GridError("Initial density has no mass on the grid")
    return values / mass


def solve_zakai(
    spec: SystemSpec,
    path: PathSample,
    grid: GridSpec,
    *,
    snapshot_every: int | None = None,
    initial: np.ndarray | None = None,
    scheme: TimeScheme | None = None,
    advection: AdvectionScheme | None = None,
) -> FilterTrajectory:
    """
    Solve the Zakai equation along the observation path of `path`.

    Args:
        spec: system specification
        path: simulated (or replayed) path; only y is read by the solver
        grid: spatial grid, must cover the support of pi_0 plus GRID_MARGIN
        snapshot_every: keep a FilterState every this many steps (first and
            last are always kept)
        initial: explicit initial field; default pi_0 rescaled to unit mass
        scheme: implicit scheme override
        advection: transport discretization override

    Returns:
        FilterTrajectory with mass, extrema, P_t[beta], dw^ and peak-node streams

    Raises:
        MassCollapseError: mass fell below MASS_COLLAPSE_FLOOR
        LinearSolveError, AssemblyError: numerical failure in a step
    """
    dt, steps = path.dt, path.steps
    if abs(steps * dt - spec.T) > 1e-9 * spec.T:
        raise ConfigError(f"Path covers {steps * dt} but the horizon is T={spec.T}")
    if grid.d != spec.d:
        raise GridError(f"Grid dimension {grid.d} does not match signal dimension {spec.d}")
    if initial is None:
        if not grid.covers(spec.pi0.support_box(), settings.GRID_MARGIN):
            raise GridError(
                f"Grid [{grid.lower}, {grid.upper}] does not cover the support of pi_0 "
                f"plus margin {settings.GRID_MARGIN}"
            )
        values = initial_field(spec, grid)
    else:
        values = np.asarray(initial, dtype=float).reshape(grid.nodes)
    snapshot_every = snapshot_every or steps

    state = FilterState.from_values(0.0, values, grid)
    peak_index = tuple(int(i) for i in np.unravel_index(np.argmax(values), grid.nodes))

    mass = np.empty(steps + 1)
    min_value = np.empty(steps + 1)
    max_value = np.empty(steps + 1)
    peak = np.empty(steps + 1)
    p_beta_stream = np.empty((steps + 1, spec.m))
    w_hat = np.empty((steps, spec.m))
    snapshots = [state]
    snapshot_steps = [0]

    logger.info(
        f"[ZAKAI] Solving {spec.name}: steps={steps} dt={dt:g} grid={grid.nodes} "
        f"static={spec.static_conditioning}"
    )

    operators: ZakaiOperators | None = None
    for k in range(steps + 1):
        if operators is None or not spec.static_conditioning:
            coeffs = condition_coefficients(spec, path.times[k], path.y[k], grid)
            operators = ZakaiOperators.assemble(coeffs, grid, advection)

        mass[k] = state.pibar.mass
        min_value[k] = state.pibar.min_value
        max_value[k] = state.pibar.max_value
        peak[k] = state.pibar.values[peak_index]
        p_beta_stream[k] = p_beta(state, operators.coeffs)
        if k == steps:
            break

        w_hat[k] = operators.coeffs.psi @ path.dy[k]
        try:
            state = _advance(state, dt, w_hat[k], operators, scheme)
        except MassCollapseError:
            logger.error(f"[ZAKAI] Mass collapse at step {k + 1} (t={path.times[k + 1]:.6g})")
            raise

        if (k + 1) % snapshot_every == 0 or k + 1 == steps:
            snapshots.append(state)
            snapshot_steps.append(k + 1)
        if steps >= 10 and (k + 1) % (steps // 10) == 0:
            logger.debug(f"[ZAKAI] step {k + 1}/{steps} mass={state.pibar.mass:.6g}")

    logger.info(
        f"[ZAKAI] Done: final mass={mass[-1]:.6g} "
        f"min ratio={np.min(min_value / max_value):.3e}"
    )
    return FilterTrajectory(
        grid=grid,
        dt=dt,
        times=path.times.copy(),
        mass=mass,
        min_value=min_value,
        max_value=max_value,
        p_beta=p_beta_stream,
        w_hat=w_hat,
        peak_index=peak_index,
        peak_values=peak,
        snapshots=tuple(snapshots),
        snapshot_steps=tuple(snapshot_steps),
    )


def initial_stability(
    spec: SystemSpec,
    path: PathSample,
    grid: GridSpec,
    shift: np.ndarray | float,
    *,
    snapshot_every: int | None = None,
    scheme: TimeScheme | None = None,
    advection: AdvectionScheme | None = None,
) -> L1Stability:
    """
    L1 sensitivity of the filter to its initial density: solves along the
    same path from pi_0, from pi_0 shifted by `shift` and from the absolute
    difference of the two.

    Raises:
        GridError: the grid does not cover the shifted support
    """
    offset = np.broadcast_to(np.asarray(shift, dtype=float), (grid.d,))
    if not grid.covers(spec.pi0.support_box() + offset[:, None], settings.GRID_MARGIN):
        raise GridError(f"Grid does not cover the support of pi_0 shifted by {offset.tolist()}")
    base = initial_field(spec, grid)
    shifted = initial_field(spec, grid, offset)
    options = {"snapshot_every": snapshot_every, "scheme": scheme, "advection": advection}
    runs = [
        solve_zakai(spec, path, grid, initial=values, **options)
        for values in (base, shifted, np.abs(base - shifted))
    ]
    return l1_stability(*runs)


def conditional_expectation(
    state: FilterState,
    f: np.ndarray | Callable[[np.ndarray], np.ndarray],
) -> float:
    """
    E[f(x_t) | F^y_t] = (pibar_t, f) / (pibar_t, 1) by trapezoid quadrature.

    Args:
        state: filter state
        f: grid array, or a callable evaluated on the node coordinates
    """
    if not state.pibar.mass > settings.MASS_COLLAPSE_FLOOR:
        raise MassCollapseError(f"Mass {state.pibar.mass:.3e} below collapse floor")
    values = f(state.grid.points) if callable(f) else np.asarray(f, dtype=float)
    values = np.broadcast_to(values, state.grid.nodes)
    return state.pibar.integrate(values) / state.pibar.mass
