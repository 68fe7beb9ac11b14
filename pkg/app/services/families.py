"""
Registry of built-in coefficient families.

Scenario files select a family by name and give its numeric parameters;
every family is vectorized over the leading axes of its input.
"""

import logging
from typing import Any, ClassVar

import numpy as np

from app.errors import ConfigError

# Configure logging
logger = logging.getLogger(__name__)


class Coefficient:
    """
    Base class for a time-homogeneous coefficient f(z) with values of shape
    out_shape, read from an input of dimension input_dim.
    """

    family: ClassVar[str] = ""
    required: ClassVar[tuple[str, ...]] = ()
    optional: ClassVar[tuple[str, ...]] = ()

    def __init__(self, out_shape: tuple[int, ...], input_dim: int) -> None:
        self.out_shape = tuple(out_shape)
        self.input_dim = input_dim

    def __call__(self, t: float, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.input_dim:
            raise ValueError(
                f"{self.family} coefficient expects input dimension {self.input_dim}, "
                f"got {z.shape[-1]}"
            )
        return self.evaluate(z)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def depends_on(self, start: int, stop: int) -> bool:
        """Whether the value changes with input coordinates start..stop-1."""
        raise NotImplementedError

    def _expand(self, scalar_field: np.ndarray) -> np.ndarray:
        return scalar_field[(...,) + (None,) * len(self.out_shape)]

    def __repr__(self) -> str:
        return f"<{type(self).__name__}(out_shape={self.out_shape}, input_dim={self.input_dim})>"


class ConstantCoefficient(Coefficient):
    family = "constant"
    required = ("value",)

    def __init__(self, out_shape, input_dim, value) -> None:
        super().__init__(out_shape, input_dim)
        self.value = _as_shape(value, self.out_shape, "value")

    def evaluate(self, z):
        return np.broadcast_to(self.value, z.shape[:-1] + self.out_shape).copy()

    def depends_on(self, start, stop):
        return False


class LinearCoefficient(Coefficient):
    """offset + slope . z, with slope of shape (*out_shape, input_dim)."""

    family = "linear"
    required = ("slope",)
    optional = ("offset",)

    def __init__(self, out_shape, input_dim, slope, offset=0.0) -> None:
        super().__init__(out_shape, input_dim)
        self.slope = _as_shape(slope, self.out_shape + (input_dim,), "slope")
        self.offset = _as_shape(offset, self.out_shape, "offset")

    def evaluate(self, z):
        return self.offset + np.tensordot(z, self.slope, axes=([-1], [-1]))

    def depends_on(self, start, stop):
        return bool(np.any(self.slope[..., start:stop] != 0.0))


class SinusoidalCoefficient(Coefficient):
    """value + amplitude * sin(wavenumber . z + phase)."""

    family = "sinusoidal"
    required = ("value", "amplitude", "wavenumber")
    optional = ("phase",)

    def __init__(self, out_shape, input_dim, value, amplitude, wavenumber, phase=0.0) -> None:
        super().__init__(out_shape, input_dim)
        self.value = _as_shape(value, self.out_shape, "value")
        self.amplitude = _as_shape(amplitude, self.out_shape, "amplitude")
        self.wavenumber = _as_shape(wavenumber, (input_dim,), "wavenumber")
        self.phase = float(phase)

    def evaluate(self, z):
        arg = z @ self.wavenumber + self.phase
        return self.value + self.amplitude * self._expand(np.sin(arg))

    def depends_on(self, start, stop):
        return bool(np.any(self.amplitude != 0.0) and np.any(self.wavenumber[start:stop] != 0.0))


class KinkCoefficient(Coefficient):
    """value * min(base + slope * |wavenumber . z - center|, cap): Lipschitz, not C^1."""

    family = "kink"
    required = ("value", "wavenumber")
    optional = ("base", "slope", "center", "cap")

    def __init__(
        self, out_shape, input_dim, value, wavenumber, base=0.0, slope=1.0, center=0.0, cap=None
    ) -> None:
        super().__init__(out_shape, input_dim)
        self.value = _as_shape(value, self.out_shape, "value")
        self.wavenumber = _as_shape(wavenumber, (input_dim,), "wavenumber")
        self.base = float(base)
        self.slope = float(slope)
        self.center = float(center)
        self.cap = np.inf if cap is None else float(cap)

    def evaluate(self, z):
        profile = self.base + self.slope * np.abs(z @ self.wavenumber - self.center)
        return self.value * self._expand(np.minimum(profile, self.cap))

    def depends_on(self, start, stop):
        return bool(self.slope != 0.0 and np.any(self.wavenumber[start:stop] != 0.0))


REGISTRY: dict[str, type[Coefficient]] = {
    cls.family: cls
    for cls in (ConstantCoefficient, LinearCoefficient, SinusoidalCoefficient, KinkCoefficient)
}


def known_families() -> list[str]:
    return sorted(REGISTRY)


def build_coefficient(
    params: dict[str, Any],
    out_shape: tuple[int, ...],
    input_dim: int,
    field_name: str,
) -> Coefficient:
    """
    Instantiate a registered family from its scenario parameters.

    Args:
        params: mapping with a "family" key plus the family's parameters
        out_shape: shape of the coefficient value
        input_dim: dimension of the argument (d1, or d1 - d for Theta)
        field_name: dotted scenario path used in error messages

    Returns:
        The coefficient callable

    Raises:
        ConfigError: unknown or missing family, unknown or missing
            parameters, or parameters of the wrong shape
    """
    params = dict(params)
    family = params.pop("family", None)
    if family is None:
        raise ConfigError(
            f"{field_name}: missing model family; known families: {', '.join(known_families())}"
        )
    cls = REGISTRY.get(family)
    if cls is None:
        raise ConfigError(
            f"{field_name}: unknown model family {family!r}; "
            f"known families: {', '.join(known_families())}"
        )

    allowed = set(cls.required) | set(cls.optional)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ConfigError(f"{field_name}: unknown parameters {unknown} for family {family!r}")
    missing = [name for name in cls.required if name not in params]
    if missing:
        raise ConfigError(f"{field_name}: family {family!r} requires parameters {missing}")

    try:
        coefficient = cls(out_shape, input_dim, **params)
    except ValueError as e:
        raise ConfigError(f"{field_name}: {e}") from e

    logger.debug(f"[MODEL] Built {field_name} = {coefficient!r}")
    return coefficient


def _as_shape(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if array.shape == shape:
        return array
    if array.ndim == 0:
        return np.full(shape, float(array))
    if array.size == int(np.prod(shape)):
        return array.reshape(shape)
    raise ValueError(f"parameter {name!r} has shape {array.shape}, expected {shape}")
