import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandcert.certify import (LOWER, UPPER, CertificationError, CertifiedValue, certified_max,
                              modulus_enclosure, poly_enclosure, taylor_shift)

P = np.polynomial.polynomial


def test_sides():
    v = CertifiedValue(1.0, 0.5)
    assert v.lower == 0.5 and v.upper == 1.5 and v.contains(1.2)
    u = CertifiedValue(2.0, math.inf, UPPER)
    assert u.upper == 2.0 and u.contains(-100)
    lo = CertifiedValue(2.0, 1.0, LOWER)
    assert lo.lower == 2.0


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        CertifiedValue(1.0, -1.0)
    with pytest.raises(ValueError):
        CertifiedValue(float("nan"))
    with pytest.raises(ValueError):
        CertifiedValue(1.0, side="sideways")


def test_numpy_scalars_are_coerced():
    v = CertifiedValue(np.float64(0.25), np.float64(1e-3))
    assert type(v.value) is float and repr(v.value) == "0.25"


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8), st.floats(-2, 2))
def test_taylor_shift_matches_derivatives(coeffs, x):
    q = taylor_shift(np.array(coeffs), np.array(x))
    d = np.array(coeffs)
    for j in range(len(coeffs)):
        assert abs(q[j] - P.polyval(x, d) / math.factorial(j)) <= 1e-9 * (1 + np.abs(coeffs).sum() * 3 ** len(coeffs))
        d = P.polyder(d) if len(d) > 1 else np.array([0.0])


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8), st.floats(-2, 2),
       st.floats(1e-4, 0.2), st.floats(-1, 1))
def test_poly_enclosure_contains_values(coeffs, xm, r, frac):
    c, err = poly_enclosure(np.array(coeffs), np.array([xm]), r)
    x = xm + frac * r
    assert abs(P.polyval(x, np.array(coeffs)) - c[0]) <= err[0] + 1e-12


@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3),
       st.complex_numbers(max_magnitude=3), st.floats(1e-4, 0.5), st.floats(-1, 1))
def test_modulus_enclosure(q0, q1, q2, r, frac):
    b = np.array([[q0], [q1], [q2]])
    lo, hi = modulus_enclosure(b, r, 0.0)
    h = frac * r
    # upper covers the panel, lower is attained at the centre
    assert abs(q0 + q1 * h + q2 * h * h) <= hi[0] + 1e-12
    assert lo[0] <= abs(q0) + 1e-12


def test_certified_max_of_a_parabola():
    def bound(tm, r):
        lo = 1 - np.maximum(np.abs(tm) - r, 0) ** 2
        hi = 1 - np.maximum(np.abs(tm) - r, 0) ** 2
        return lo - (2 * np.abs(tm) + r) * r, hi
    up, low, evals = certified_max(bound, -1.0, 1.0, 0.25)
    assert low <= 1.0 <= up and up - low < 1e-8


def test_certified_max_panel_cap():
    def bound(tm, r):
        return -r, r
    with pytest.raises(CertificationError):
        certified_max(bound, 0.0, 1.0, 0.5, max_panels=10, min_width=1e-300, rtol=0, atol=0)
