import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdhetnet.quadrature import (NonConvergence, NonFinite, QuadratureSettings, integrate_finite,
                                 integrate_semi_infinite)


def simpson(f, a, b, n=1_000_000):
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def rho_mapped(q, alpha):
    # ∫_1^∞ q/(q+u^{α/2}) du with u = w^{-2/(α-2)} becomes a smooth integral on (0, 1].
    g = 2 / (alpha - 2)
    p = alpha / (alpha - 2)
    return lambda w: q * g / (1 + q * w ** p)


def test_linear():
    res = integrate_finite(lambda x: x, 0, 1)
    assert res.value == pytest.approx(0.5, abs=1e-15)
    assert abs(res.value - 0.5) <= res.error


def test_rayleigh_cdf():
    lam, theta = 1e-6, 300.0
    exact = 1 - math.exp(-math.pi * lam * theta ** 2)
    res = integrate_finite(lambda x: 2 * math.pi * lam * x * np.exp(-math.pi * lam * x * x), 0, theta)
    assert res.value == pytest.approx(exact, rel=1e-12)
    assert abs(res.value - exact) <= res.error


def test_interference_integral_finite_form_vs_simpson():
    f = rho_mapped(1.0, 3.5)
    oracle = simpson(f, 0.0, 1.0)
    res = integrate_finite(f, 0.0, 1.0)
    assert res.value == pytest.approx(oracle, rel=1e-11)


def test_exponential_tail():
    res = integrate_semi_infinite(lambda x: np.exp(-x), 0.0)
    assert res.value == pytest.approx(1.0, rel=1e-12)
    assert abs(res.value - 1.0) <= res.error


@pytest.mark.parametrize("power", [1.0, 2.0])
def test_rho_alpha_four(power):
    res = integrate_semi_infinite(lambda u: 1 / (1 + u ** 2), 1.0, power=power)
    assert abs(res.value - math.pi / 4) <= max(res.error, 1e-15)
    assert res.value == pytest.approx(math.pi / 4, rel=1e-9)


def test_fd_user_interference_integral_vs_simpson():
    q, alpha = 1.0 * 0.2, 3.5
    oracle = simpson(rho_mapped(q, alpha), 0.0, 1.0)
    res = integrate_semi_infinite(lambda u: q / (q + u ** (alpha / 2)), 1.0, power=2 / (alpha - 2))
    assert res.value == pytest.approx(oracle, rel=1e-9)
    assert abs(res.value - oracle) <= res.error + 1e-14


def test_plain_map_handles_slow_tail():
    # the default t/(1-t) map with a u^{-1.75} tail still converges
    res = integrate_semi_infinite(lambda u: 1 / (1 + u ** 1.75), 1.0)
    oracle = simpson(rho_mapped(1.0, 3.5), 0.0, 1.0)
    assert res.value == pytest.approx(oracle, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(a, b):
    f = lambda x: np.sin(3 * x) + x ** 2
    g = lambda x: np.exp(-x)
    lhs = integrate_finite(lambda x: a * f(x) + b * g(x), 0.0, 2.0)
    fa, gb = integrate_finite(f, 0.0, 2.0), integrate_finite(g, 0.0, 2.0)
    rhs = a * fa.value + b * gb.value
    assert abs(lhs.value - rhs) <= lhs.error + abs(a) * fa.error + abs(b) * gb.error + 1e-13


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.9))
def test_additivity(frac):
    f = lambda x: 1 / (1 + x * x)
    a, c = 0.0, 5.0
    b = a + frac * (c - a)
    whole = integrate_finite(f, a, c)
    left, right = integrate_finite(f, a, b), integrate_finite(f, b, c)
    assert abs(whole.value - left.value - right.value) <= whole.error + left.error + right.error + 1e-14
    assert whole.value == pytest.approx(math.atan(5.0), rel=1e-12)


def test_nonfinite_integrand():
    with pytest.raises(NonFinite):
        integrate_finite(lambda x: 1 / x, 0.0, 1.0)
    with pytest.raises(NonFinite):
        integrate_finite(lambda x: np.full_like(x, np.nan), 0.0, 1.0)


def test_nonconvergence_on_budget():
    tight = QuadratureSettings(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=10)
    with pytest.raises(NonConvergence):
        integrate_finite(lambda x: np.sin(200 * x) ** 2, 0.0, 10.0, tight)


def test_nonconvergence_on_slow_decay():
    with pytest.raises((NonConvergence, NonFinite)):
        integrate_semi_infinite(lambda u: 1 / u ** 1.01, 1.0, QuadratureSettings(max_subdivisions=50))


def test_empty_range_and_bad_limits():
    assert integrate_finite(np.exp, 2.0, 2.0).value == 0.0
    with pytest.raises(ValueError):
        integrate_finite(np.exp, 2.0, 1.0)


def test_settings_invariants():
    with pytest.raises(ValueError):
        QuadratureSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSettings(max_subdivisions=5)
