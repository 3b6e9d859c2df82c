import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conewave import quad


def test_gauss_exact_for_polynomials():
    rule = quad.QuadRule(order=4, panels=1)
    assert quad.integrate_1d(lambda s: s**7, 0.0, 2.0, rule) == pytest.approx(2.0**8 / 8, rel=1e-14)


def test_simpson():
    rule = quad.QuadRule(kind="simpson", panels=64)
    assert quad.integrate_1d(np.sin, 0.0, math.pi, rule) == pytest.approx(2.0, rel=1e-7)
    with pytest.raises(ValueError):
        quad.QuadRule(kind="trapezoid")


def test_integrate_2d():
    val = quad.integrate_2d(lambda t, x: t**2 * x, (0.0, 1.0), (0.0, 2.0))
    assert val == pytest.approx(2.0 / 3.0, rel=1e-14)


def test_nonfinite_integrand():
    with pytest.raises(quad.QuadratureError), np.errstate(divide="ignore"):
        quad.integrate_1d(lambda s: 1 / (s - s), 0.0, 1.0)


def test_cumulative_at():
    pts = np.array([0.5, 1.0, 2.0])
    assert np.allclose(quad.cumulative_at(np.cos, pts), np.sin(pts), rtol=1e-14)
    with pytest.raises(ValueError):
        quad.cumulative_at(np.cos, [1.0, 0.5])


def test_cumulative_integral_exact_for_quintics():
    h = 0.1
    s = np.arange(21) * h
    out = quad.cumulative_integral(s**5 - 2 * s**2, h)
    assert np.allclose(out, s**6 / 6 - 2 * s**3 / 3, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_volterra_closed_form(k):
    n = 129
    h = 1 / (n - 1)
    t = np.arange(n) * h
    exact = t ** (k + 1) / (k + 1)
    assert np.allclose(quad.volterra_moment(np.ones(n), k, h), exact, atol=1e-14)
    assert np.allclose(quad.volterra_moment_direct(np.ones(n), k, h), exact, atol=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_fast_and_direct_agree(k):
    n = 129
    h = 2.0 / (n - 1)
    t = np.arange(n) * h
    w = np.cos(3 * t) + t**2 * np.exp(-t)
    fast = quad.volterra_moment(w, k, h)
    direct = quad.volterra_moment_direct(w, k, h)
    assert np.max(np.abs(fast - direct)) <= 1e-8 * np.max(np.abs(direct))


def test_volterra_against_analytic():
    n = 257
    h = 1.0 / (n - 1)
    t = np.arange(n) * h
    # int_0^t (t-s) e^s ds = e^t - 1 - t
    assert np.allclose(quad.volterra_moment(np.exp(t), 1, h), np.exp(t) - 1 - t, atol=1e-12)


def test_extra_axes_carried():
    w = np.outer(np.linspace(0, 1, 33), [1.0, 2.0, 3.0])
    out = quad.volterra_moment(w, 2, 1 / 32)
    assert out.shape == w.shape
    assert np.allclose(out[:, 2], 3 * out[:, 0])


def test_integrate_x_kernel():
    y = np.linspace(0, 1, 65)
    assert quad.integrate_x_kernel(y, 1.0, 1 / 64) == pytest.approx(1 / 12, rel=1e-12)
    x = 0.37
    assert quad.integrate_x_kernel(np.ones(65), x, 1 / 64) == pytest.approx(x**3 / 3, rel=1e-12)
    with pytest.raises(ValueError):
        quad.integrate_x_kernel(np.ones(65), 1.5, 1 / 64)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.sampled_from([0, 1, 2]))
def test_volterra_linear_and_exact_on_cubics(c, k):
    n = 65
    h = 1.5 / (n - 1)
    t = np.arange(n) * h
    w = c[0] + c[1] * t + c[2] * t**2 + c[3] * t**3
    exact = sum(c[m] * math.factorial(m) * math.factorial(k) / math.factorial(m + k + 1) * t ** (m + k + 1) for m in range(4))
    assert np.allclose(quad.volterra_moment(w, k, h), exact, atol=1e-11)
