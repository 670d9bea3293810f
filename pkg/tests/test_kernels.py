import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandcert.kernels import (H1, H2, derivative_bound, grid_values, kernel_by_name, kernel_eval,
                              sinc_power_antiderivative, sinc_power_kernel, tail_majorant,
                              total_integral)

# frozen from 30-digit mpmath quadrature of the sinc powers
ORACLE = {
    ("h1", 1.0): 0.99999425623303851546,
    ("h1", 0.5): 0.99393956380404191122,
    ("h2", 5.0): 1.00013891922472621747,
    ("h2", 0.25): 0.60333240328994140857,
}


@pytest.mark.parametrize("key", sorted(ORACLE))
def test_kernel_matches_quadrature_oracle(key):
    name, t = key
    v = kernel_eval(kernel_by_name(name), t)
    assert v.contains(ORACLE[key], slack=1e-13)
    assert v.radius <= 1e-9


def test_total_integrals():
    i3, i8 = total_integral(3), total_integral(8)
    assert i3.contains(0.75) and i3.radius <= 1e-9
    assert i8.contains(151 / 315) and i8.radius <= 1e-9


def test_half_integral_at_zero_and_infinity():
    assert sinc_power_antiderivative(8, 0.0).contains(151 / 630)
    assert kernel_eval(H1, 0.0).contains(0.0)
    assert kernel_eval(H2, math.inf).contains(1.0)
    assert kernel_eval(H1, -math.inf).contains(-1.0)


def test_normalization_constants():
    assert H1.norm_constant == Fraction(315, 151)
    assert H2.norm_constant == Fraction(4, 3)
    for k in (H1, H2):
        assert k.normalization().contains(1.0)


def test_tail_majorant():
    bound = tail_majorant(H1, 2.0)
    closed = 2 * (315 / 151) / (7 * math.pi ** 8 * 2 ** 7)
    drift = H1.normalization().radius + abs(H1.normalization().value - 1)
    assert bound.value <= closed + drift + 1e-15
    assert tail_majorant(H1, math.inf).value == 0.0
    assert abs(ORACLE[("h2", 5.0)] - 1) <= tail_majorant(H2, 5.0).value
    with pytest.raises(ValueError):
        tail_majorant(H1, 0.0)


def test_derivative_bound_bernstein_and_finite_differences():
    for k, bw in ((H1, 8 * math.pi), (H2, 3 * math.pi)):
        d = derivative_bound(k).value
        assert d <= bw * 1.02  # sup|h| is at most about 1.01
        t = np.linspace(-4, 4, 20001)
        v = grid_values(k, t)[:, 1]
        assert np.max(np.abs(np.diff(v) / np.diff(t))) <= d


def test_unknown_kernel():
    with pytest.raises(ValueError):
        kernel_by_name("h3")


def test_generic_sinc_power_is_normalized():
    k = sinc_power_kernel(5)
    assert abs(kernel_eval(k, 64.0).value - 1) < 1e-6


@given(st.floats(-20, 20))
def test_oddness(t):
    for k in (H1, H2):
        a, b = kernel_eval(k, t), kernel_eval(k, -t)
        assert abs(a.value + b.value) <= 2 * (a.radius + b.radius) + 1e-300


@given(st.floats(0, 30), st.floats(0, 30))
def test_antiderivative_monotone_even_power(t1, t2):
    t1, t2 = sorted((t1, t2))
    a, b = sinc_power_antiderivative(8, t1), sinc_power_antiderivative(8, t2)
    assert a.value <= b.value + a.radius + b.radius


@pytest.mark.parametrize("T", [1.0, 2.0, 4.0, 8.0])
def test_tail_consistency(T):
    for k in (H1, H2):
        v = kernel_eval(k, T)
        assert abs(v.value - 1) <= tail_majorant(k, T).value + v.radius
