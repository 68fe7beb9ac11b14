import numpy as np
import pytest

from app.errors import ConfigError, GridError
from app.models import ConditionedCoefficients, FilterState, GridSpec
from app.services.model import condition_coefficients
from app.services.oracles import kalman_bucy
from app.services.scenario import build_system_spec, linear_gaussian_from_config
from app.services.sde_sim import simulate_system
from app.services.zakai import (
    ZakaiOperators,
    assemble_deterministic_operator,
    assemble_stochastic_operator,
    axis_difference,
    conditional_expectation,
    initial_field,
    initial_stability,
    solve_zakai,
    step,
)


def heat_solution(grid: GridSpec, t: float) -> np.ndarray:
    variance = 0.25 + 2.0 * t
    x = grid.points[..., 0]
    return np.exp(-(x**2) / (2 * variance)) / np.sqrt(2 * np.pi * variance)


def test_axis_difference_is_exact_on_affine_fields():
    grid = GridSpec(lower=(-1.0, 0.0), h=(0.1, 0.2), nodes=(11, 9))
    field = 3.0 * grid.points[..., 0] - 2.0 * grid.points[..., 1] + 1.0
    assert axis_difference(grid, 0) @ field.ravel() == pytest.approx(np.full(grid.size, 3.0))
    assert axis_difference(grid, 1) @ field.ravel() == pytest.approx(np.full(grid.size, -2.0))


@pytest.mark.parametrize("advection", ["upwind", "central"])
def test_deterministic_operator_conserves_mass(sinusoidal_spec, coarse_grid, advection):
    coeffs = condition_coefficients(sinusoidal_spec, 0.0, np.zeros(1), coarse_grid)
    L = assemble_deterministic_operator(coeffs, coarse_grid, advection)
    column_mass = L.T @ coarse_grid.weights.ravel()
    assert np.max(np.abs(column_mass)) < 1e-10 * abs(L).max()


def test_deterministic_operator_conserves_mass_in_two_dimensions():
    grid = GridSpec(lower=(-1.0, -1.0), h=(0.2, 0.25), nodes=(11, 9))
    x, y = grid.points[..., 0], grid.points[..., 1]
    a = np.zeros(grid.nodes + (2, 2))
    a[..., 0, 0] = 1.0 + 0.1 * np.sin(x)
    a[..., 1, 1] = 0.8
    a[..., 0, 1] = a[..., 1, 0] = 0.2
    coeffs = ConditionedCoefficients(
        t=0.0,
        y=np.zeros(1),
        a=a,
        b_vec=np.stack([-x, 0.5 * y], axis=-1),
        sigma=np.zeros(grid.nodes + (2, 1)),
        beta=np.zeros(grid.nodes + (1,)),
        psi=np.eye(1),
        div_a=np.zeros(grid.nodes + (2,)),
        div_sigma=np.zeros(grid.nodes + (1,)),
    )
    L = assemble_deterministic_operator(coeffs, grid)
    assert np.max(np.abs(L.T @ grid.weights.ravel())) < 1e-10 * abs(L).max()


def test_heat_operator_approximates_the_laplacian(heat_spec):
    grid = GridSpec.symmetric(1, 6.0, 0.02)
    coeffs = condition_coefficients(heat_spec, 0.0, np.zeros(1), grid)
    L = assemble_deterministic_operator(coeffs, grid)
    x = grid.points[..., 0]
    u = np.exp(-(x**2))
    laplacian = (4 * x**2 - 2) * u
    interior = slice(5, -5)
    assert (L @ u)[interior] == pytest.approx(laplacian[interior], abs=1e-3)


def test_stochastic_operator_without_cross_term_is_multiplication(kalman_spec, coarse_grid):
    coeffs = condition_coefficients(kalman_spec, 0.0, np.zeros(1), coarse_grid)
    Lambda = assemble_stochastic_operator(coeffs, coarse_grid, 0)
    u = np.exp(-coarse_grid.points[..., 0] ** 2).ravel()
    assert Lambda @ u == pytest.approx(coarse_grid.points[..., 0].ravel() * u)
    with pytest.raises(IndexError):
        assemble_stochastic_operator(coeffs, coarse_grid, 1)


def test_stochastic_operator_integrates_to_beta(sinusoidal_spec, coarse_grid):
    coeffs = condition_coefficients(sinusoidal_spec, 0.0, np.array([0.4]), coarse_grid)
    Lambda = assemble_stochastic_operator(coeffs, coarse_grid, 0)
    weights = coarse_grid.weights.ravel()
    beta = coeffs.beta[..., 0].ravel()
    # zero outer flux: only the beta u term survives integration
    assert np.max(np.abs(Lambda.T @ weights - beta * weights)) < 1e-12 * abs(Lambda).max()

    u = np.exp(-((coarse_grid.points[..., 0] - 0.5) ** 2)).ravel()
    assert weights @ (Lambda @ u) == pytest.approx(weights @ (beta * u), rel=1e-12)


def test_stochastic_operator_approximates_the_cross_term(sinusoidal_spec):
    grid = GridSpec.symmetric(1, 6.0, 0.02)
    coeffs = condition_coefficients(sinusoidal_spec, 0.0, np.zeros(1), grid)
    Lambda = assemble_stochastic_operator(coeffs, grid, 0)
    x = grid.points[..., 0]
    u = np.exp(-(x**2))
    sigma, d_sigma = 0.5 + 0.1 * np.sin(x), 0.1 * np.cos(x)
    expected = -(d_sigma * u - 2.0 * x * sigma * u) + coeffs.beta[..., 0] * u
    interior = slice(5, -5)
    assert (Lambda @ u)[interior] == pytest.approx(expected[interior], abs=1e-3)


def test_zero_step_is_the_identity(sinusoidal_spec, coarse_grid):
    coeffs = condition_coefficients(sinusoidal_spec, 0.0, np.zeros(1), coarse_grid)
    state = FilterState.from_values(0.0, initial_field(sinusoidal_spec, coarse_grid), coarse_grid)
    after = step(state, 0.0, np.zeros(1), coeffs)
    assert np.array_equal(after.pibar.values, state.pibar.values)


def test_uninformative_step_keeps_mass(heat_spec, coarse_grid):
    coeffs = condition_coefficients(heat_spec, 0.0, np.zeros(1), coarse_grid)
    operators = ZakaiOperators.assemble(coeffs, coarse_grid)
    state = FilterState.from_values(0.0, initial_field(heat_spec, coarse_grid), coarse_grid)
    for _ in range(20):
        state = step(state, 0.01, np.array([0.3]), coeffs, operators=operators)
    assert state.pibar.mass == pytest.approx(1.0, abs=1e-12)
    assert state.t == pytest.approx(0.2)


def test_heat_limit_matches_the_gaussian_kernel(heat_spec):
    grid = GridSpec.symmetric(1, 6.0, 0.02)
    path = simulate_system(heat_spec, 1e-3, seed=1)
    traj = solve_zakai(heat_spec, path, grid)
    error = np.max(np.abs(traj.final.pibar.values - heat_solution(grid, heat_spec.T)))
    assert error <= 5e-3
    assert traj.mass == pytest.approx(np.ones(traj.steps + 1), abs=1e-10)


def test_heat_limit_spatial_order(heat_spec):
    path = simulate_system(heat_spec, 1e-3, seed=1)
    errors = []
    for h in (0.08, 0.04, 0.02):
        grid = GridSpec.symmetric(1, 6.0, h)
        traj = solve_zakai(heat_spec, path, grid, scheme="crank_nicolson")
        errors.append(np.max(np.abs(traj.final.pibar.values - heat_solution(grid, heat_spec.T))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.8), (errors, orders)


def test_backward_euler_step_matches_a_dense_solve(heat_spec):
    grid = GridSpec(lower=(-3.0,), h=(6.0 / 63,), nodes=(64,))
    h, dt = grid.h[0], 0.01
    # zero-flux Laplacian: half cells at the two ends
    laplacian = (np.diag(np.full(63, 1.0), -1) - 2.0 * np.eye(64) + np.diag(np.full(63, 1.0), 1)) / h**2
    laplacian[0, 1] = laplacian[-1, -2] = 2.0 / h**2
    coeffs = condition_coefficients(heat_spec, 0.0, np.zeros(1), grid)

    u = np.exp(-4.0 * grid.points[..., 0] ** 2)
    state = FilterState.from_values(0.0, u, grid)
    for _ in range(5):
        state = step(state, dt, np.zeros(1), coeffs, scheme="backward_euler")
        u = np.linalg.solve(np.eye(64) - dt * laplacian, u)
    np.testing.assert_allclose(state.pibar.values, u, rtol=0.0, atol=1e-12)


def test_linear_benchmark_tracks_kalman_bucy(make_config):
    config = make_config("kalman_benchmark")
    spec = build_system_spec(config)
    grid = GridSpec.symmetric(1, 6.0, 0.02)
    path = simulate_system(spec, 1e-3, seed=11)
    traj = solve_zakai(spec, path, grid, snapshot_every=250)
    means, covs = kalman_bucy(linear_gaussian_from_config(config), path)
    x = grid.points[..., 0]
    for state, k in zip(traj.snapshots, traj.snapshot_steps):
        mean = conditional_expectation(state, x)
        variance = conditional_expectation(state, (x - mean) ** 2)
        assert abs(mean - means[k, 0]) <= 0.1 * np.sqrt(covs[k, 0, 0])
        assert variance == pytest.approx(covs[k, 0, 0], rel=0.1)


def test_trajectory_streams_and_snapshots(sinusoidal_spec, coarse_grid):
    path = simulate_system(sinusoidal_spec, 0.01, seed=5)
    traj = solve_zakai(sinusoidal_spec, path, coarse_grid, snapshot_every=30)
    assert traj.snapshot_steps == (0, 30, 60, 90, 100)
    assert traj.mass.shape == (101,)
    assert traj.p_beta.shape == (101, 1)
    assert traj.w_hat.shape == (100, 1)
    assert traj.peak_values[0] == traj.snapshots[0].pibar.values[traj.peak_index]
    assert traj.final.t == pytest.approx(1.0)


def test_initial_field_override_is_linear(sinusoidal_spec, coarse_grid):
    path = simulate_system(sinusoidal_spec, 0.01, seed=6)
    base = initial_field(sinusoidal_spec, coarse_grid)
    one = solve_zakai(sinusoidal_spec, path, coarse_grid, initial=base)
    three = solve_zakai(sinusoidal_spec, path, coarse_grid, initial=3.0 * base)
    assert three.final.pibar.values == pytest.approx(3.0 * one.final.pibar.values, rel=1e-9, abs=1e-14)


def test_repeated_solves_are_bit_identical(sinusoidal_spec, coarse_grid):
    path = simulate_system(sinusoidal_spec, 0.01, seed=8)
    first = solve_zakai(sinusoidal_spec, path, coarse_grid, snapshot_every=25)
    second = solve_zakai(sinusoidal_spec, path, coarse_grid, snapshot_every=25)
    assert np.array_equal(first.mass, second.mass)
    assert np.array_equal(first.p_beta, second.p_beta)
    for a, b in zip(first.snapshots, second.snapshots):
        assert np.array_equal(a.pibar.values, b.pibar.values)


def test_normalized_density_ignores_the_initial_scale(sinusoidal_spec, coarse_grid):
    path = simulate_system(sinusoidal_spec, 0.01, seed=9)
    base = initial_field(sinusoidal_spec, coarse_grid)
    one = solve_zakai(sinusoidal_spec, path, coarse_grid, snapshot_every=25, initial=base)
    scaled = solve_zakai(sinusoidal_spec, path, coarse_grid, snapshot_every=25, initial=7.0 * base)
    for a, b in zip(one.snapshots, scaled.snapshots):
        np.testing.assert_allclose(b.normalized.values, a.normalized.values, rtol=0.0, atol=1e-12)
    assert scaled.p_beta == pytest.approx(one.p_beta, abs=1e-12)


def test_initial_stability_is_dominated_by_the_gap_solution(kalman_spec, coarse_grid):
    path = simulate_system(kalman_spec, 1e-3, seed=12)
    result = initial_stability(kalman_spec, path, coarse_grid, 0.25, snapshot_every=100)
    assert 0.0 < result.sensitivity < 10.0
    assert result.domination <= 1.0 + 1e-9


def test_initial_stability_needs_room_for_the_shift(kalman_spec, coarse_grid):
    path = simulate_system(kalman_spec, 0.01, seed=1)
    with pytest.raises(GridError, match="shifted"):
        initial_stability(kalman_spec, path, coarse_grid, 2.0)


def test_grid_must_cover_initial_support(kalman_spec):
    path = simulate_system(kalman_spec, 0.01, seed=1)
    with pytest.raises(GridError, match="does not cover"):
        solve_zakai(kalman_spec, path, GridSpec.symmetric(1, 3.0, 0.1))


def test_path_horizon_must_match(kalman_spec, heat_spec, coarse_grid):
    path = simulate_system(heat_spec, 0.01, seed=1)
    with pytest.raises(ConfigError, match="horizon"):
        solve_zakai(kalman_spec, path, coarse_grid)


def test_conditional_expectation_of_one(kalman_spec, coarse_grid):
    state = FilterState.from_values(0.0, 2.5 * initial_field(kalman_spec, coarse_grid), coarse_grid)
    assert conditional_expectation(state, lambda p: np.ones(p.shape[:-1])) == pytest.approx(1.0)
    assert conditional_expectation(state, coarse_grid.points[..., 0]) == pytest.approx(0.0, abs=1e-12)
