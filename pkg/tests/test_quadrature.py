import math

import numpy as np
import pytest

from revhom.quadrature import WindowTooSmallError, cumulative_from, integrate_line, panels


def test_gaussian_adaptive_window():
    val, err, T = integrate_line(lambda t: np.exp(-t * t))
    assert val == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert err < 1e-12
    assert T >= 10


def test_half_line_and_vector_valued():
    def f(t):
        s = 1 / np.cosh(t)
        return np.stack([s**2, s**4], axis=-1)

    val, _, _ = integrate_line(f, 40.0, half=True)
    assert val == pytest.approx([1.0, 2.0 / 3.0], rel=1e-13)


def test_window_too_small_suggests_larger():
    with pytest.raises(WindowTooSmallError) as info:
        integrate_line(lambda t: np.exp(-np.abs(t)), 5.0)
    assert info.value.suggested == 10.0


def test_cumulative_both_directions():
    pn = panels(0.0, 3.0, 0.5)
    left = cumulative_from(np.cos, pn, "left")
    right = cumulative_from(np.cos, pn, "right")
    assert np.allclose(left, np.sin(pn.nodes), atol=1e-14)
    assert np.allclose(right, np.sin(3.0) - np.sin(pn.nodes), atol=1e-14)
    with pytest.raises(ValueError):
        cumulative_from(np.cos, pn, "up")


def test_panel_weights_sum_to_length():
    pn = panels(-2.0, 5.0, 0.7)
    assert pn.weights.sum() == pytest.approx(7.0, rel=1e-14)
    assert np.all(np.diff(pn.edges) <= 0.7 + 1e-12)
