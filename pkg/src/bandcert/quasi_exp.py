"""Polynomial stand-ins for x -> exp(2 pi i x).

``f_n`` is the degree-n Taylor truncation, and ``g_n`` corrects it by a
multiple of x^2 so that g_n(0) = g_n(1) = 1.  The coefficients are built in
50-digit arithmetic (mpmath) and rounded once to complex doubles.  Certified
sups then run on those doubles, with Horner rounding folded into the bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

import mpmath
import numpy as np

from .certify import (EPS, UPPER, CertificationError, CertifiedValue, certified_max,
                      modulus_enclosure, rounding_floor, taylor_shift)

TWO_PI = 2 * math.pi
DEFAULT_INTERVAL = (-2.0, 2.0)
DEFAULT_CAP = 200
_DPS = 50


@dataclass(frozen=True)
class ComplexPolynomial:
    """Ascending complex coefficients."""

    coefficients: Tuple[complex, ...]
    name: str = ""

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("a polynomial needs at least one coefficient")

    @property
    def degree(self) -> int:
        c = self.coefficients
        d = len(c) - 1
        while d > 0 and c[d] == 0:
            d -= 1
        return d

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=complex)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.array)

    def reflected(self) -> "ComplexPolynomial":
        """x -> p(-x)."""
        c = tuple(ck * (-1) ** k for k, ck in enumerate(self.coefficients))
        return ComplexPolynomial(c, f"{self.name}(-x)" if self.name else "")

    def derivative(self) -> "ComplexPolynomial":
        c = self.coefficients
        if len(c) == 1:
            return ComplexPolynomial((0j,))
        return ComplexPolynomial(tuple(k * c[k] for k in range(1, len(c))))

    def matrix_eval(self, S: np.ndarray) -> np.ndarray:
        """Horner evaluation at a square matrix."""
        S = np.asarray(S)
        I = np.eye(S.shape[0], dtype=complex)
        out = self.coefficients[-1] * I
        for ck in reversed(self.coefficients[:-1]):
            out = out @ S + ck * I
        return out

    def abs_sum(self, rho: float) -> float:
        """sum |c_k| rho^k, which bounds |p| on |x| <= rho."""
        return float(np.polynomial.polynomial.polyval(rho, np.abs(self.array)))


# exact-ish construction ---------------------------------------------------------

def _mp_exp_coeffs(n: int):
    with mpmath.workdps(_DPS):
        z = 2j * mpmath.pi
        out = [mpmath.mpc(1)]
        for k in range(1, n + 1):
            out.append(out[-1] * z / k)
        return out


def _mp_g_coeffs(n: int):
    c = _mp_exp_coeffs(n)
    with mpmath.workdps(_DPS):
        corr = mpmath.fsum(c[1:])
        c = list(c) + [mpmath.mpc(0)] * max(0, 3 - len(c))
        c[2] = c[2] - corr
    return c


def _to_complex(cs) -> Tuple[complex, ...]:
    return tuple(complex(ck) for ck in cs)


@lru_cache(maxsize=None)
def build_f(n: int) -> ComplexPolynomial:
    """Degree-n Taylor polynomial of exp(2 pi i x)."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise ValueError(f"n must be a non-negative integer, got {n!r}")
    return ComplexPolynomial(_to_complex(_mp_exp_coeffs(int(n))), f"f{n}")


@lru_cache(maxsize=None)
def build_g(n: int) -> ComplexPolynomial:
    """f_n minus (sum_{k=1}^n (2 pi i)^k / k!) x^2."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError(f"n must be a positive integer, got {n!r}")
    c = _to_complex(_mp_g_coeffs(int(n)))
    return ComplexPolynomial(c, f"g{n}")


def x2_minus_x_division(n: int) -> Tuple[ComplexPolynomial, Tuple[complex, complex]]:
    """Divide g_n - 1 by x^2 - x in 50-digit arithmetic.

    Returns ``(quotient, (r0, r1))``; the remainder should vanish identically.
    """
    c = _mp_g_coeffs(n)
    with mpmath.workdps(_DPS):
        rem = list(c)
        rem[0] -= 1
        deg = len(rem) - 1
        q = [mpmath.mpc(0)] * max(1, deg - 1)
        for k in range(deg, 1, -1):
            lead = rem[k]
            q[k - 2] = lead
            rem[k] = mpmath.mpc(0)
            rem[k - 1] += lead  # subtracting lead * (x^k - x^(k-1))
        return ComplexPolynomial(_to_complex(q), f"(g{n}-1)/(x^2-x)"), \
            (complex(rem[0]), complex(rem[1]))


def correction_sum(n: int) -> complex:
    """sum_{k=1}^n (2 pi i)^k / k!"""
    c = _mp_exp_coeffs(n)
    with mpmath.workdps(_DPS):
        return complex(mpmath.fsum(c[1:]))


# certified sups ---------------------------------------------------------------

def _check_interval(interval) -> Tuple[float, float]:
    a, b = float(interval[0]), float(interval[1])
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"interval must be finite, got {interval!r}")
    if a > b:
        raise ValueError(f"interval must satisfy a <= b, got [{a}, {b}]")
    return a, b


def _step(a: float, b: float) -> float:
    return max((b - a) / 256, 1e-3)


def _defect_bound(g: ComplexPolynomial):
    c = g.array
    deg = len(c) - 1

    def bound(xm, r):
        b1 = taylor_shift(c, xm)
        b2 = taylor_shift(c, -xm)
        b2 = b2 * ((-1.0) ** np.arange(deg + 1)).reshape((-1,) + (1,) * np.ndim(xm))
        rho = np.abs(xm) + r
        # Taylor coefficients of g(x) g(-x) - 1 at xm
        prod = np.zeros((2 * deg + 1,) + np.shape(xm), dtype=complex)
        for i in range(deg + 1):
            prod[i:i + deg + 1] += b1[i] * b2
        prod[0] -= 1.0
        rf = rounding_floor(c, rho)
        pw = np.array([r ** j for j in range(deg + 1)])
        s1 = np.sum(np.abs(b1) * pw, axis=0)
        s2 = np.sum(np.abs(b2) * pw, axis=0)
        # s1, s2 bound |g(x)|, |g(-x)| on the panel
        rounding = rf * (s1 + s2 + rf) + 4 * (2 * deg + 2) * EPS * (s1 * s2 + 1)
        return modulus_enclosure(prod, r, rounding)
    return bound


def _exp_error_bound(g: ComplexPolynomial):
    c = g.array
    deg = len(c) - 1
    j = np.arange(deg + 1)
    ej = np.array([(TWO_PI ** k) / math.factorial(k) for k in j]) * (1j ** j)

    def bound(xm, r):
        b = taylor_shift(c, xm)
        phase = np.exp(1j * TWO_PI * xm)
        q = ej[:, None] * phase[None, :] - b
        tail = (TWO_PI * r) ** (deg + 1) / math.factorial(deg + 1) * np.exp(TWO_PI * r)
        rounding = (rounding_floor(c, np.abs(xm) + r)
                    + 32 * EPS * np.exp(TWO_PI * r) * (1 + TWO_PI * np.abs(xm)) + tail)
        return modulus_enclosure(q, r, rounding)
    return bound


def _abs_bound(g: ComplexPolynomial):
    c = g.array

    def bound(xm, r):
        b = taylor_shift(c, xm)
        return modulus_enclosure(b, r, rounding_floor(c, np.abs(xm) + r))
    return bound


def _certify(bound, a, b, anchor, rtol=1e-9):
    upper, lower, _ = certified_max(bound, a, b, _step(a, b), rtol=rtol, atol=1e-14)
    return CertifiedValue(upper, max(0.0, upper - lower), UPPER, anchor)


@lru_cache(maxsize=4096)
def _sup_defect(n: int, a: float, b: float) -> CertifiedValue:
    return _certify(_defect_bound(build_g(n)), a, b,
                    f"sup_[{a:g},{b:g}] |g{n}(x) g{n}(-x) - 1|")


@lru_cache(maxsize=4096)
def _sup_exp_error(n: int, a: float, b: float) -> CertifiedValue:
    return _certify(_exp_error_bound(build_g(n)), a, b,
                    f"sup_[{a:g},{b:g}] |exp(2 pi i x) - g{n}(x)|")


def sup_defect(n: int, interval: Sequence[float] = DEFAULT_INTERVAL) -> CertifiedValue:
    """Upper bound of sup over [a, b] of |g_n(x) g_n(-x) - 1|."""
    a, b = _check_interval(interval)
    build_g(n)
    return _sup_defect(int(n), a, b)


def sup_exp_error(n: int, interval: Sequence[float] = DEFAULT_INTERVAL) -> CertifiedValue:
    """Upper bound of sup over [a, b] of |exp(2 pi i x) - g_n(x)|."""
    a, b = _check_interval(interval)
    build_g(n)
    return _sup_exp_error(int(n), a, b)


def sup_abs_g(n: int, interval: Sequence[float] = DEFAULT_INTERVAL) -> CertifiedValue:
    """Upper bound of sup |g_n| over [a, b] and its mirror [-b, -a].

    ``g_n(S)`` and ``g_n(-S)`` are the quasiinvertible pair, so both ranges
    feed the norm cap N.
    """
    a, b = _check_interval(interval)
    g = build_g(n)
    v1 = _certify(_abs_bound(g), a, b, "")
    v2 = _certify(_abs_bound(g), -b, -a, "")
    best = max(v1.lower, v2.lower)
    val = max(v1.value, v2.value)
    return CertifiedValue(val, val - best, UPPER,
                          f"sup_(|x| in [{a:g},{b:g}]) |g{n}(+-x)|")


def analytic_exp_bound(n: int, r: float) -> float:
    """(2 pi r)^(n+1)/(n+1)! + |sum_{k=1}^n (2 pi i)^k/k!| r^2, valid on [-r, r]."""
    return (TWO_PI * r) ** (n + 1) / math.factorial(n + 1) + abs(correction_sum(n)) * r * r


def literal_delta_bound(norm_s: float, m: int = 17) -> float:
    """(2 pi)^m (||S||^m + ||S||^2) / m!, the two-partial-sum display taken literally."""
    return TWO_PI ** m * (norm_s ** m + norm_s ** 2) / math.factorial(m)


def _grid_lower(fn_bound, a: float, b: float, n_pts: int = 257) -> float:
    xs = np.linspace(a, b, n_pts)
    lo, _ = fn_bound(xs, np.zeros_like(xs))
    return float(np.max(lo))


def minimal_m(epsilon: float, interval: Sequence[float] = DEFAULT_INTERVAL,
              cap: int = DEFAULT_CAP) -> int:
    """Least n with certified sup_defect < epsilon and sup_exp_error < 1 on the interval."""
    if not (0 < epsilon < 0.05):
        raise ValueError(f"epsilon must lie in (0, 1/20), got {epsilon!r}")
    a, b = _check_interval(interval)
    for n in range(1, cap + 1):
        g = build_g(n)
        # cheap rejection from point values before any certification
        if _grid_lower(_defect_bound(g), a, b) >= epsilon:
            continue
        if _grid_lower(_exp_error_bound(g), a, b) >= 1.0:
            continue
        if sup_defect(n, (a, b)).value < epsilon and sup_exp_error(n, (a, b)).value < 1.0:
            return n
    raise CertificationError(
        f"minimal_m: no n <= {cap} certifies sup |g_n(x)g_n(-x) - 1| < {epsilon:g} "
        f"and sup |exp(2 pi i x) - g_n(x)| < 1 on [{a:g}, {b:g}]")


__all__ = [
    "ComplexPolynomial", "analytic_exp_bound", "build_f", "build_g", "correction_sum",
    "literal_delta_bound", "minimal_m", "sup_abs_g", "sup_defect", "sup_exp_error",
    "x2_minus_x_division",
]
