import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandcert.certify import CertificationError
from bandcert.oracle import opnorm, quasi_exp_pair
from bandcert.quasi_exp import (analytic_exp_bound, build_f, build_g, correction_sum,
                                literal_delta_bound, minimal_m, sup_abs_g, sup_defect,
                                sup_exp_error, x2_minus_x_division)

TWO_PI_I = 2j * math.pi


def test_small_cases():
    assert np.allclose(build_f(0).array, [1])
    assert np.allclose(build_f(1).array, [1, TWO_PI_I])
    g1 = build_g(1)
    assert abs(g1(0.5) - (1 + 0.5j * math.pi)) < 1e-15


def test_f17_near_exp_at_one():
    assert abs(build_f(17)(1.0) - 1) <= (2 * math.pi) ** 18 / math.factorial(18)


@pytest.mark.parametrize("n", range(1, 26))
def test_g_fixes_zero_and_one(n):
    g = build_g(n)
    assert abs(g(0.0) - 1) < 1e-12
    assert abs(g(1.0) - 1) < 1e-9


@pytest.mark.parametrize("n", range(1, 26))
def test_g_minus_one_divisible_by_x2_minus_x(n):
    _, (r0, r1) = x2_minus_x_division(n)
    assert abs(r0) <= 1e-12 and abs(r1) <= 1e-12


def test_correction_sum():
    n = 9
    s = sum(TWO_PI_I ** k / math.factorial(k) for k in range(1, n + 1))
    assert abs(correction_sum(n) - s) < 1e-9


def test_defect_examples():
    assert sup_defect(1, (0.0, 0.0)).value <= 1e-13
    assert math.isfinite(sup_defect(17).value)
    vals = [sup_defect(n).value for n in range(15, 21)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert sup_defect(80).value < 1e-6


def test_exp_error_examples():
    assert sup_exp_error(5, (0.0, 0.0)).value <= 1e-13
    assert sup_exp_error(5, (1.0, 1.0)).value <= 1e-11
    assert sup_exp_error(17, (-0.05, 1.05)).value < 0.209


@given(st.integers(1, 30), st.floats(0.05, 2.0))
def test_exp_error_below_analytic_remainder(n, r):
    # the analytic bound can be tight, so allow the enclosure's own rounding radius
    v = sup_exp_error(n, (-r, r))
    assert v.value <= analytic_exp_bound(n, r) * (1 + 1e-12) + v.radius


def test_literal_display_readings():
    assert literal_delta_bound(1.5) > 1
    assert 0.2 < literal_delta_bound(1.0049) < 0.25


def test_minimal_m():
    assert minimal_m(0.049, (0.0, 0.0)) == 1
    m = minimal_m(0.04)
    assert 10 <= m <= 60
    assert minimal_m(0.01) >= m
    assert sup_defect(m).value < 0.04 and sup_exp_error(m).value < 1
    with pytest.raises(CertificationError):
        minimal_m(0.04, cap=5)
    with pytest.raises(ValueError):
        minimal_m(0.2)


def test_sup_abs_g17_on_chi_range():
    assert sup_abs_g(17, (-0.0049, 1.0049)).value < 7


@given(st.integers(0, 2 ** 32 - 1))
def test_quasiinvertible_pair_on_random_hermitian(seed):
    rng = np.random.default_rng(seed)
    n = 6
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = (X + X.conj().T) / 2
    lam, V = np.linalg.eigh(H)
    a, b = -0.05, 1.05
    lam = a + (b - a) * (lam - lam.min()) / (lam.max() - lam.min())
    S = V @ np.diag(lam) @ V.conj().T
    u, v = quasi_exp_pair(S, 17)
    bound = sup_defect(17, (a, b)).value
    assert opnorm(u @ v - np.eye(n)) <= bound + 1e-9
