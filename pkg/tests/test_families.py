import numpy as np
import pytest

from app.errors import ConfigError
from app.services.families import (
    ConstantCoefficient,
    KinkCoefficient,
    LinearCoefficient,
    SinusoidalCoefficient,
    build_coefficient,
    known_families,
)


def test_constant_broadcasts_over_leading_axes():
    theta = ConstantCoefficient((1, 2), 2, value=[[1.0, 0.0]])
    values = theta(0.0, np.zeros((5, 3, 2)))
    assert values.shape == (5, 3, 1, 2)
    assert np.all(values[..., 0, 0] == 1.0)
    assert not theta.depends_on(0, 2)


def test_linear_evaluates_offset_plus_slope():
    b = LinearCoefficient((1,), 2, slope=[[-1.0, 0.0]], offset=0.5)
    assert b(0.0, np.array([2.0, 3.0])) == pytest.approx([-1.5])
    assert b.depends_on(0, 1)
    assert not b.depends_on(1, 2)


def test_sinusoidal_matches_closed_form():
    B = SinusoidalCoefficient((1,), 2, value=[0.0], amplitude=[2.0], wavenumber=[0.5, 0.0])
    z = np.array([[1.0, 7.0], [-2.0, 0.0]])
    expected = 2.0 * np.sin(0.5 * z[:, 0])
    assert B(0.0, z)[:, 0] == pytest.approx(expected)
    assert not B.depends_on(1, 2)


@pytest.mark.parametrize("x, expected", [(0.0, 0.8), (1.0, 1.3), (-1.0, 1.3), (10.0, 1.8)])
def test_kink_profile_is_capped(x, expected):
    theta = KinkCoefficient((1, 2), 2, value=[[1.0, 0.0]], wavenumber=[1.0, 0.0], base=0.8, slope=0.5, cap=1.8)
    assert theta(0.0, np.array([x, 0.0]))[0, 0] == pytest.approx(expected)
    assert theta(0.0, np.array([x, 0.0]))[0, 1] == 0.0


def test_wrong_input_dimension_is_rejected():
    b = LinearCoefficient((1,), 2, slope=[[1.0, 0.0]])
    with pytest.raises(ValueError, match="input dimension"):
        b(0.0, np.zeros(3))


def test_missing_family_lists_known_families():
    with pytest.raises(ConfigError) as excinfo:
        build_coefficient({"value": 1.0}, (1,), 2, "system.b")
    message = str(excinfo.value)
    assert "system.b" in message
    for family in known_families():
        assert family in message


@pytest.mark.parametrize(
    "params, fragment",
    [
        ({"family": "cubic"}, "unknown model family"),
        ({"family": "constant", "value": 1.0, "scale": 2.0}, "unknown parameters"),
        ({"family": "sinusoidal", "value": 0.0}, "requires parameters"),
        ({"family": "linear", "slope": [1.0, 2.0, 3.0]}, "expected"),
    ],
)
def test_invalid_parameters_raise_config_error(params, fragment):
    with pytest.raises(ConfigError, match=fragment):
        build_coefficient(params, (1,), 2, "system.B")


def test_scalar_parameters_fill_the_shape():
    B = build_coefficient({"family": "linear", "slope": 2.0}, (1,), 2, "system.B")
    assert B.slope.shape == (1, 2)
    assert B(0.0, np.array([1.0, 1.0])) == pytest.approx([4.0])
