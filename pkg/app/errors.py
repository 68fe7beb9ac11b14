"""
Exception hierarchy for the engine.

ConfigError subclasses map to CLI exit code 2, NumericalError subclasses to
exit code 3.
"""


class ZakaiError(Exception):
    """Base class for all engine errors."""

    exit_code = 3


class ConfigError(ZakaiError):
    """Invalid scenario, grid or command-line input."""

    exit_code = 2


class GridError(ConfigError):
    """Grid does not satisfy its invariants."""


class GridMismatch(ConfigError):
    """Two fields that must share a grid do not."""


class AssumptionViolation(ConfigError):
    """The scenario coefficients fail the sampled standing assumptions."""


class NumericalError(ZakaiError):
    """Failure during a numerical computation."""

    exit_code = 3


class SingularObservationNoise(NumericalError):
    """Theta Theta* is (numerically) singular."""


class EvaluationError(NumericalError):
    """A coefficient returned non-finite values."""


class QuadratureError(NumericalError):
    """Mollifier quadrature does not normalize."""


class BlowupError(NumericalError):
    """Simulated state left the guard radius."""


class AssemblyError(NumericalError):
    """Operator assembly met a non positive definite diffusion."""


class LinearSolveError(NumericalError):
    """Implicit substep did not converge."""


class MassCollapseError(NumericalError):
    """Total mass of the unnormalized density fell below the floor."""


class RiccatiBlowup(NumericalError):
    """Kalman-Bucy covariance lost positive definiteness."""


class DegeneracyError(NumericalError):
    """Particle ensemble collapsed."""


class InsufficientResolution(NumericalError):
    """Not enough samples or lag levels for a diagnostic."""
