from .families import build_coefficient, known_families
from .model import compute_psi, condition_coefficients, mollify_theta, verify_assumptions
from .sde_sim import simulate_system, derived_wieners, likelihood_rho
from .diagnostics import diagnose, p_beta
from .zakai import solve_zakai, step, conditional_expectation
from .oracles import kalman_bucy, particle_filter, kde_field, density_distance

__all__ = [
    "build_coefficient",
    "known_families",
    "compute_psi",
    "condition_coefficients",
    "mollify_theta",
    "verify_assumptions",
    "simulate_system",
    "derived_wieners",
    "likelihood_rho",
    "diagnose",
    "p_beta",
    "solve_zakai",
    "step",
    "conditional_expectation",
    "kalman_bucy",
    "particle_filter",
    "kde_field",
    "density_distance",
]
