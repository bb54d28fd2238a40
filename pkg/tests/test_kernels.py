import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wcsph.kernels import CubicSplineKernel, smoothing_length_from_count
from wcsph.validate import gradient_fd_error, kernel_lattice_integral


def test_h_recovers_sphere_radius():
    assert smoothing_length_from_count(4 * math.pi / 3, 50, 50) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("k, n, expected", [(20, 8000, 0.084195), (20, 1000, 0.16839)])
def test_h_values(k, n, expected):
    # expected values computed independently: (3 * 1 * k / (4 pi n)) ** (1/3)
    assert smoothing_length_from_count(1.0, k, n) == pytest.approx(expected, abs=5e-6)


@pytest.mark.parametrize("args", [(0, 20, 100), (1, 0, 100), (1, 20, 0), (-1, 20, 100), (1, 200, 100)])
def test_h_rejects_bad_input(args):
    with pytest.raises(ValueError):
        smoothing_length_from_count(*args)


def test_value_at_origin():
    assert CubicSplineKernel(1.0).evaluate(0.0) == pytest.approx(1 / math.pi, rel=1e-14)


def test_value_at_q_one():
    # 1 - 1.5 + 0.75 = 0.25 on the inner branch and 0.25 * 1 on the outer one
    k = CubicSplineKernel(0.5)
    assert k.evaluate(0.5) == pytest.approx(0.25 / (math.pi * 0.125), rel=1e-14)


@pytest.mark.parametrize("h", [0.01, 0.3, 1.0, 7.0])
def test_compact_support(h):
    k = CubicSplineKernel(h)
    assert k.support_radius == 2 * h
    assert k.evaluate(2 * h) == 0.0
    assert k.evaluate(5 * h) == 0.0
    assert k.evaluate(np.nextafter(2 * h, 0)) >= 0.0


@pytest.mark.parametrize("bad", [-1e-9, np.nan, np.inf])
def test_evaluate_rejects(bad):
    with pytest.raises(ValueError):
        CubicSplineKernel(1.0).evaluate(bad)


def test_gradient_rejects_non_finite():
    with pytest.raises(ValueError):
        CubicSplineKernel(1.0).gradient([np.nan, 0, 0])


def test_gradient_zero_at_origin_and_outside():
    k = CubicSplineKernel(1.0)
    assert np.all(k.gradient([0.0, 0.0, 0.0]) == 0)
    assert np.all(k.gradient([2.0, 0.0, 0.0]) == 0)
    assert np.all(k.gradient([1.5, 1.5, 0.0]) == 0)


def test_gradient_matches_finite_difference_at_half():
    k = CubicSplineKernel(1.0)
    step = 1e-7
    g = k.gradient([0.5, 0.0, 0.0])
    fd = (k.evaluate(0.5 + step) - k.evaluate(0.5 - step)) / (2 * step)
    assert abs(g[0] - fd) / abs(fd) < 1e-6
    assert g[1] == 0 and g[2] == 0


def test_gradient_random_annulus():
    assert gradient_fd_error(samples=1000) < 1e-5


def test_normalization():
    assert kernel_lattice_integral(h=1.0, per_h=50) == pytest.approx(1.0, abs=1e-3)


def test_normalization_scales_with_h():
    assert kernel_lattice_integral(h=0.05, per_h=25) == pytest.approx(1.0, abs=2e-3)


def test_monotone_decay():
    k = CubicSplineKernel(0.7)
    w = k.evaluate(np.linspace(0, 1.4, 5001))
    assert np.all(np.diff(w) <= 0)
    assert np.all(w >= 0)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3), st.floats(0.05, 2.0))
def test_gradient_antisymmetric(d, h):
    k = CubicSplineKernel(h)
    d = np.array(d)
    assert np.array_equal(k.gradient(d), -k.gradient(-d))


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-2, 2, allow_nan=False)] * 3))
def test_gradient_points_along_displacement(d):
    k = CubicSplineKernel(1.0)
    d = np.array(d)
    g = k.gradient(d)
    # parallel to d and pointing inward (W decreases outward)
    assert np.linalg.norm(np.cross(g, d)) <= 1e-12 * (1 + np.linalg.norm(g) * np.linalg.norm(d))
    assert g @ d <= 0


def test_array_shapes_preserved():
    k = CubicSplineKernel(1.0)
    assert k.evaluate(np.zeros((4, 5))).shape == (4, 5)
    assert k.gradient(np.zeros((2, 3, 3))).shape == (2, 3, 3)
    assert isinstance(k.evaluate(0.3), float)
