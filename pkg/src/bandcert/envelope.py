"""Certified suprema of scalar expressions in a normalizing function.

An :class:`Envelope` maps an enclosure ``f in [fm - r, fm + r]`` to a lower and
an upper bound of some expression ``E(f)``.  :func:`certified_sup` scans
``|t| >= s`` with adaptive panels (kernel enclosure on each panel, then the
envelope on top), and hands everything past ``cutoff_T`` to the kernel's tail
majorant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .certify import (EPS, UPPER, CertificationError, CertifiedValue, certified_last_crossing,
                      certified_max, modulus_enclosure, poly_enclosure,
                      rounding_floor, taylor_shift)
from .kernels import PI, Kernel

P = np.polynomial.polynomial

DEFAULT_CUTOFF = 64.0
DEFAULT_STEP = 1.0 / 64
DEFAULT_RTOL = 1e-9
DEFAULT_S_TOL = 1e-4


@dataclass(frozen=True)
class Envelope:
    name: str
    bound: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    # depends on f only through f**2, so t and -t agree
    symmetric: bool = True
    # analytic global bound as a function of sup|f| (inf when unknown)
    ceiling: Optional[Callable[[float], float]] = None


def _poly(coeffs, fm, r):
    c, e = poly_enclosure(coeffs, fm, r)
    return c - e, c + e


def _abs(lo, hi):
    upper = np.maximum(np.abs(lo), np.abs(hi))
    lower = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))
    return lower, upper


def _abs_poly(coeffs, fm, r):
    c, e = poly_enclosure(coeffs, fm, r)
    a = np.abs(c)
    return np.maximum(0.0, a - e), a + e


# polynomials in f, ascending coefficients
ONE_MINUS_F2 = np.array([1.0, 0.0, -1.0])
A_SQ = P.polymul(ONE_MINUS_F2, ONE_MINUS_F2)                      # (1-f^2)^2
TWO_MINUS_F2 = np.array([2.0, 0.0, -1.0])
T_21 = P.polymul(TWO_MINUS_F2, ONE_MINUS_F2)                      # (2-f^2)(1-f^2)
F_A = P.polymul([0.0, 1.0], ONE_MINUS_F2)                         # f(1-f^2)
F_T21 = P.polymul([0.0, 1.0], T_21)                               # f(2-f^2)(1-f^2)
F2_T = P.polymul([0.0, 0.0, 1.0], TWO_MINUS_F2)                   # f^2(2-f^2)
A_PLUS_A2 = P.polyadd(A_SQ, ONE_MINUS_F2)                         # (1-f^2)^2 + (1-f^2)
FROB_SQ = P.polyadd(P.polyadd(2 * P.polymul(A_SQ, A_SQ), P.polymul([0, 0, 1.0], A_SQ)),
                    P.polymul(P.polymul(F2_T, TWO_MINUS_F2), A_SQ))


def _b_bound(fm, r):
    l1, u1 = _poly(A_PLUS_A2, fm, r)
    la, ua = _abs_poly(T_21, fm, r)
    l2, u2 = _poly(A_SQ, fm, r)
    return np.maximum(l1, la + l2), np.maximum(u1, ua + u2)


def _p_norm_bound(fm, r):
    l11, u11 = _poly(A_SQ, fm, r)
    l12, u12 = _abs_poly(F_A, fm, r)
    l21, u21 = _abs_poly(F_T21, fm, r)
    l22, u22 = _abs_poly(F2_T, fm, r)
    return np.maximum(l11 + l12, l21 + l22), np.maximum(u11 + u12, u21 + u22)


def _p_norm_literal_bound(fm, r):
    l11, u11 = _poly(A_SQ, fm, r)
    l12, u12 = _abs_poly(F_A, fm, r)
    l21, u21 = _abs_poly(F_T21, fm, r)
    return np.maximum(l11 + l12, l21 + l11), np.maximum(u11 + u12, u21 + u11)


def _frobenius_bound(fm, r):
    lo, hi = _poly(FROB_SQ, fm, r)
    return np.sqrt(np.maximum(lo, 0.0)), np.sqrt(np.maximum(hi, 0.0)) * (1 + 4 * EPS)


def _abs_f_bound(fm, r):
    return _abs_poly([0.0, 1.0], fm, r)


def _b_ceiling(sup_f):
    # with a = 1 - f^2 in [-1, 1] both branches are at most 3
    return 3.0 if sup_f <= math.sqrt(2) else math.inf


B_ENVELOPE = Envelope("b", _b_bound, ceiling=_b_ceiling)
# row sums of the 2x2 index idempotent, entries (1-f^2)^2, f(1-f^2), f(2-f^2)(1-f^2), f^2(2-f^2)
P_NORM = Envelope("p_norm", _p_norm_bound)
# the same display with (1-f^2)^2 in the (2,2) slot, kept as a diagnostic
P_NORM_LITERAL = Envelope("p_norm_literal", _p_norm_literal_bound)
# Frobenius norm of A(u) = p(u) - diag(0, 1); bounds the 2x2 operator norm
A_FROBENIUS = Envelope("a_frobenius", _frobenius_bound)
ABS_F = Envelope("abs", _abs_f_bound)


def u_envelope(g_coeffs, name: str = "u", mirror: bool = True) -> Envelope:
    """``|g(S) - 1|`` with ``S = (f + 1) / 2``, for a complex polynomial ``g``.

    With ``mirror`` the partner ``|g(-S) - 1|`` is folded in as well, since
    the quasiinverse ``g(-S)`` must satisfy the same bound.
    """
    c = np.array(g_coeffs, dtype=complex)
    c[0] -= 1.0
    polys = [c]
    if mirror:
        polys.append(c * (-1.0) ** np.arange(len(c)))

    def bound(fm, r):
        xm = (np.asarray(fm, dtype=float) + 1.0) / 2.0
        half = np.asarray(r, dtype=float) / 2.0
        lo = hi = None
        for q in polys:
            l, h = modulus_enclosure(taylor_shift(q, xm), half,
                                     rounding_floor(q, np.abs(xm) + half))
            lo = l if lo is None else np.maximum(lo, l)
            hi = h if hi is None else np.maximum(hi, h)
        return lo, hi

    return Envelope(name, bound, symmetric=False)


ENVELOPES = {e.name: e for e in (B_ENVELOPE, P_NORM, P_NORM_LITERAL, A_FROBENIUS, ABS_F)}


@dataclass(frozen=True)
class SignKernel:
    """The exact sign function, as a degenerate kernel for sanity checks."""

    bandwidth: float = 8 * PI
    name: str = "sgn"

    @property
    def fourier_radius(self) -> float:
        return self.bandwidth

    @property
    def label(self) -> str:
        return self.name

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, 1.0, -1.0), np.zeros(t.shape)

    def enclose(self, tm, r):
        tm = np.asarray(tm, dtype=float)
        lo = tm - r
        # a panel that straddles 0 sees both signs; 0 itself maps to +1
        v = np.where(lo >= 0, 1.0, np.where(tm + r < 0, -1.0, 0.0))
        return v, np.where(v == 0.0, 1.0, 0.0)

    def tail_bound(self, T: float) -> float:
        return 0.0

    def rescaled(self, factor: float) -> "SignKernel":
        return self


@dataclass(frozen=True)
class EnvelopeQuery:
    kernel: Kernel
    s: float = 0.0
    grid_step: float = DEFAULT_STEP
    cutoff_T: float = DEFAULT_CUTOFF

    def __post_init__(self):
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ValueError(f"s must be a non-negative real, got {self.s!r}")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if not self.cutoff_T > 0:
            raise ValueError("cutoff_T must be positive")


def _scan_bound(kernel, envelope: Envelope):
    def bound(tm, r):
        fm, fe = kernel.enclose(tm, r)
        lo, hi = envelope.bound(fm, fe)
        if not envelope.symmetric:
            lo2, hi2 = envelope.bound(-fm, fe)
            lo, hi = np.maximum(lo, lo2), np.maximum(hi, hi2)
        return lo, hi
    return bound


def _tail_bounds(kernel, envelope: Envelope, T: float):
    tau = kernel.tail_bound(T)
    one = np.array([1.0])
    lo, hi = envelope.bound(one, np.array([tau]))
    lo2, hi2 = envelope.bound(-one, np.array([tau]))
    return float(max(lo[0], lo2[0])), float(max(hi[0], hi2[0]))


def certified_sup(kernel, envelope: Envelope, s: float = 0.0, *,
                  cutoff_T: float = DEFAULT_CUTOFF, grid_step: float = DEFAULT_STEP,
                  rtol: float = DEFAULT_RTOL, atol: float = 1e-15,
                  anchor: str = "") -> CertifiedValue:
    """Upper bound of sup over |t| >= s of envelope(kernel(t))."""
    if not s >= 0:
        raise ValueError(f"s must be non-negative, got {s!r}")
    tail_T = max(cutoff_T, s)
    t_lo, t_hi = _tail_bounds(kernel, envelope, tail_T) if math.isfinite(tail_T) else (0.0, 0.0)
    if s < cutoff_T:
        upper, lower, _ = certified_max(_scan_bound(kernel, envelope), s, cutoff_T, grid_step,
                                        atol=atol, rtol=rtol)
    else:
        upper, lower = -math.inf, -math.inf
    value = max(upper, t_hi)
    best = max(lower, t_lo)
    return CertifiedValue(value, max(0.0, value - best), UPPER,
                          anchor=anchor or f"sup_(|t|>={s:g}) {envelope.name}")


def b_envelope(query: EnvelopeQuery) -> CertifiedValue:
    """Upper bound of b_f(s) = sup over |t| >= s of
    max{(1-f^2)^2 + (1-f^2), |(2-f^2)(1-f^2)| + (1-f^2)^2}."""
    return certified_sup(query.kernel, B_ENVELOPE, query.s, cutoff_T=query.cutoff_T,
                         grid_step=query.grid_step, anchor="b_f(s)")


def p_norm_bound(kernel, *, cutoff_T: float = DEFAULT_CUTOFF,
                 grid_step: float = DEFAULT_STEP) -> CertifiedValue:
    """Upper bound of the row-sum norm bound for the index idempotent p_chi."""
    return certified_sup(kernel, P_NORM, 0.0, cutoff_T=cutoff_T, grid_step=grid_step,
                         anchor="||p_chi|| row-sum bound")


def p_norm_literal(kernel, **kw) -> CertifiedValue:
    return certified_sup(kernel, P_NORM_LITERAL, 0.0, anchor="||p_chi|| display, literal", **kw)


def p_operator_norm_diagnostic(kernel, t_max: float = 8.0, n: int = 40001) -> float:
    """Dense-grid sup of the true 2x2 operator norm of p(f(t)); not certified."""
    t = np.linspace(0.0, t_max, n)
    f, _ = kernel.evaluate(t)
    f = np.concatenate([f, -f])
    a = 1 - f * f
    mats = np.empty((len(f), 2, 2))
    mats[:, 0, 0] = a * a
    mats[:, 0, 1] = f * a
    mats[:, 1, 0] = f * (2 - f * f) * a
    mats[:, 1, 1] = f * f * (2 - f * f)
    return float(np.max(np.linalg.norm(mats, 2, axis=(1, 2))))


def threshold_solve(kernel, target: float, *, envelope: Envelope = B_ENVELOPE,
                    cutoff_T: float = DEFAULT_CUTOFF, grid_step: float = DEFAULT_STEP,
                    s_tol: float = DEFAULT_S_TOL, anchor: str = "") -> CertifiedValue:
    """Smallest certified s* with sup over |t| >= s of envelope <= target for all s >= s*."""
    if not target > 0:
        raise ValueError(f"target must be positive, got {target!r}")
    anchor = anchor or f"least s with sup {envelope.name} <= {target:g}"
    if envelope.ceiling is not None:
        if envelope.ceiling(sup_abs(kernel, cutoff_T=cutoff_T, grid_step=grid_step).value) <= target:
            return CertifiedValue(0.0, 0.0, UPPER, anchor=anchor)
    _, t_hi = _tail_bounds(kernel, envelope, cutoff_T)
    if t_hi > target:
        raise CertificationError(
            f"target {target:g} unreachable below cutoff_T={cutoff_T:g}: the tail majorant "
            f"pushed through {envelope.name} gives {t_hi:.6g}")
    bound = _scan_bound(kernel, envelope)
    s_star, s_floor = certified_last_crossing(bound, 0.0, cutoff_T, grid_step, target, s_tol)
    # re-certify from s_star with a fresh sup scan; nudge right on borderline ties
    for _ in range(256):
        check = certified_sup(kernel, envelope, s_star, cutoff_T=cutoff_T, grid_step=grid_step)
        if check.value <= target:
            break
        s_star += s_tol / 4
    else:
        raise CertificationError(f"could not certify {envelope.name} <= {target:g} past {s_star}")
    floor = max(0.0, s_floor) if math.isfinite(s_floor) else 0.0
    return CertifiedValue(s_star, s_star - floor, UPPER, anchor=anchor)


def sup_abs(kernel, **kw) -> CertifiedValue:
    """Upper bound of sup_t |h(t)|."""
    return certified_sup(kernel, ABS_F, 0.0, anchor="sup |h|", **kw)


__all__ = [
    "A_FROBENIUS", "ABS_F", "B_ENVELOPE", "ENVELOPES", "Envelope", "EnvelopeQuery", "P_NORM",
    "P_NORM_LITERAL", "SignKernel", "b_envelope", "certified_sup", "p_norm_bound",
    "p_norm_literal", "p_operator_norm_diagnostic", "sup_abs", "threshold_solve", "u_envelope",
]
