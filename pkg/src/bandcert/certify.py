"""Enclosure plumbing shared by every numeric module.

A :class:`CertifiedValue` is a float together with the bracket that is known
to contain the true quantity.  The adaptive panel scans below turn pointwise
enclosures of a function on short panels into certified suprema and
certified "last crossing" thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

TWO_SIDED = "two-sided"
UPPER = "upper-bound"
LOWER = "lower-bound"
SIDES = (TWO_SIDED, UPPER, LOWER)

EPS = np.finfo(float).eps


class CertificationError(RuntimeError):
    """A requested bound could not be certified at the requested resolution."""


@dataclass(frozen=True)
class CertifiedValue:
    """A real number with a rigorous bracket.

    ``two-sided``: truth in ``[value - radius, value + radius]``.
    ``upper-bound``: truth <= value; the best known lower estimate is
    ``value - radius`` (``radius`` may be ``inf`` when none is known).
    ``lower-bound``: truth >= value, mirrored.
    """

    value: float
    radius: float = 0.0
    side: str = TWO_SIDED
    anchor: str = ""

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "radius", float(self.radius))
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")
        if not (self.radius >= 0):
            raise ValueError(f"radius must be non-negative, got {self.radius!r}")
        if math.isnan(self.value):
            raise ValueError("value is NaN")

    @property
    def lower(self) -> float:
        if self.side == LOWER:
            return self.value
        return self.value - self.radius

    @property
    def upper(self) -> float:
        if self.side == UPPER:
            return self.value
        return self.value + self.radius

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack

    def with_anchor(self, anchor: str) -> "CertifiedValue":
        return CertifiedValue(self.value, self.radius, self.side, anchor)

    def scaled(self, factor: float) -> "CertifiedValue":
        """Multiply by a positive exact factor (rounding folded into the radius)."""
        if factor <= 0:
            raise ValueError("factor must be positive")
        v = self.value * factor
        rad = self.radius * factor + abs(v) * 2 * EPS
        if self.side == UPPER:
            v = math.nextafter(v, math.inf)
        elif self.side == LOWER:
            v = math.nextafter(v, -math.inf)
        return CertifiedValue(v, rad, self.side, self.anchor)

    def to_dict(self) -> dict:
        return {"value": self.value, "radius": self.radius, "side": self.side,
                "anchor": self.anchor}

    @classmethod
    def from_dict(cls, d: dict) -> "CertifiedValue":
        return cls(float(d["value"]), float(d["radius"]), d["side"], d.get("anchor", ""))

    def __str__(self) -> str:
        sym = {TWO_SIDED: "+/-", UPPER: "<=", LOWER: ">="}[self.side]
        if self.side == TWO_SIDED:
            return f"{self.value:.12g} +/- {self.radius:.3g}"
        return f"{sym} {self.value:.12g} (bracket {self.radius:.3g})"


def taylor_shift(coeffs, xm):
    """Taylor coefficients ``p^(j)(xm) / j!`` of a polynomial at every ``xm``.

    Returns ``(b, rounding)``: ``b`` has shape ``(deg + 1,) + xm.shape`` and
    ``rounding`` bounds the accumulated floating error of ``sum_j |b_j| r^j``
    for any ``r`` with ``|xm| + r <= rho`` (pass ``rho`` to :func:`rounding_floor`).
    """
    c = np.asarray(coeffs)
    xm = np.asarray(xm, dtype=float)
    deg = len(c) - 1
    # repeated synthetic division by (x - xm)
    work = [np.broadcast_to(ck, xm.shape).astype(c.dtype) for ck in c]
    out = []
    for j in range(deg + 1):
        acc = work[deg]
        nxt = [None] * (deg + 1)
        nxt[deg] = acc
        for k in range(deg - 1, j - 1, -1):
            acc = work[k] + xm * acc
            nxt[k] = acc
        out.append(nxt[j])
        work = [None] * (j + 1) + nxt[j + 1:]
    return np.array(out)


def rounding_floor(coeffs, rho):
    """Error allowance for Horner-type evaluation of ``coeffs`` at ``|x| <= rho``."""
    absc = np.abs(np.asarray(coeffs))
    deg = len(absc) - 1
    return 4.0 * (deg + 2) * EPS * np.polynomial.polynomial.polyval(rho, absc)


def _powers(r, n):
    return np.array([r ** j for j in range(n)])


def poly_enclosure(coeffs, xm, r):
    """Enclose a polynomial on the panels ``[xm - r, xm + r]``.

    ``coeffs`` is ascending and may be complex.  Returns ``(center, err)`` with
    ``|p(x) - center| <= err`` for every x in the panel, from the exact Taylor
    expansion at ``xm`` plus a rounding allowance.
    """
    xm = np.asarray(xm, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), xm.shape)
    b = taylor_shift(coeffs, xm)
    if len(b) == 1:
        spread = np.zeros(xm.shape)
    else:
        spread = np.sum(np.abs(b[1:]) * _powers(r, len(b))[1:], axis=0)
    err = spread * (1 + 8 * len(b) * EPS) + rounding_floor(coeffs, np.abs(xm) + r)
    return b[0], err


def modulus_enclosure(b, r, rounding):
    """Bounds of ``|q|`` on ``[xm - r, xm + r]`` from Taylor coefficients ``b`` of q.

    The linear part is handled exactly (``|q0 + q1 h|`` maximised over
    ``|h| <= r``), so panels at a stationary point of ``|q|`` refine
    quadratically even when q rotates in the complex plane.
    """
    r = np.asarray(r, dtype=float)
    q0 = b[0]
    a0 = np.abs(q0)
    if len(b) == 1:
        lin = a0
        rest = 0.0
    else:
        q1 = b[1]
        cross = np.abs(np.real(np.conj(q0) * q1))
        lin = np.sqrt(a0 * a0 + 2 * cross * r + np.abs(q1) ** 2 * r * r)
        rest = np.sum(np.abs(b[2:]) * _powers(r, len(b))[2:], axis=0) if len(b) > 2 else 0.0
    slack = 1 + 8 * len(b) * EPS
    lower = np.maximum(0.0, a0 - rounding)
    upper = (lin + rest) * slack + rounding
    return lower, upper


Bound = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def _initial_panels(a: float, b: float, step: float):
    if b < a:
        raise ValueError(f"empty interval [{a}, {b}]")
    if b == a:
        return np.array([a]), np.array([0.0])
    n = max(1, int(math.ceil((b - a) / step)))
    edges = np.linspace(a, b, n + 1)
    return edges[:-1], np.diff(edges)


def certified_max(bound: Bound, a: float, b: float, step: float, *,
                  atol: float = 1e-15, rtol: float = 1e-9,
                  max_panels: int = 400_000,
                  min_width: float = 1e-10) -> Tuple[float, float, int]:
    """Certified maximum of a function on ``[a, b]``.

    ``bound(mid, r)`` returns arrays ``(lower, upper)``: ``lower`` is a
    certified lower bound of the function at some point of each panel and
    ``upper`` a certified upper bound over the whole panel.  Panels whose upper
    bound exceeds the best lower value by more than the tolerance are bisected
    until they are ``min_width`` wide or until a bisection fails to shrink
    ``upper - lower`` by a quarter.  Past that point the enclosure's rounding
    floor dominates, so their upper bound is accepted as is and the returned
    bracket simply widens.

    Returns ``(upper, lower, evaluations)``.
    """
    lo, w = _initial_panels(a, b, step)
    prev_gap = np.full(len(lo), np.inf)
    best_lower = -math.inf
    done_upper = -math.inf
    evaluations = 0
    while True:
        r = w / 2
        L, U = bound(lo + r, r)
        evaluations += len(lo)
        best_lower = max(best_lower, float(np.max(L)))
        thresh = best_lower + max(atol, rtol * abs(best_lower))
        gap = U - L
        # stop once halving no longer shrinks the enclosure: rounding dominates
        refine = (U > thresh) & (w > min_width) & (gap < 0.75 * prev_gap)
        if (~refine).any():
            done_upper = max(done_upper, float(np.max(U[~refine])))
        if not refine.any():
            break
        lo, w, gap = lo[refine], w[refine], gap[refine]
        if 2 * len(lo) > max_panels:
            raise CertificationError(
                f"insufficient grid resolution: {2 * len(lo)} active panels exceed "
                f"the cap {max_panels} while certifying a supremum on [{a}, {b}]")
        half = w / 2
        lo = np.concatenate([lo, lo + half])
        w = np.concatenate([half, half])
        prev_gap = np.concatenate([gap, gap])
    return done_upper, best_lower, evaluations


def certified_last_crossing(bound: Bound, a: float, b: float, step: float,
                            target: float, width_tol: float, *,
                            max_panels: int = 400_000) -> Tuple[float, float]:
    """Smallest ``s`` in ``[a, b]`` past which the function is certified <= target.

    Returns ``(s_star, s_floor)``: every t in ``[s_star, b]`` is certified, and
    the function certainly exceeds ``target`` at ``s_floor`` (``-inf`` if no such
    point was seen), so the true threshold lies in ``[s_floor, s_star]``.
    """
    lo, w = _initial_panels(a, b, step)
    s_floor = -math.inf
    s_bad = -math.inf
    while len(lo):
        r = w / 2
        L, U = bound(lo + r, r)
        above = L > target
        if above.any():
            s_floor = max(s_floor, float(np.max((lo + r)[above])))
        bad = U > target
        settled = bad & (w <= width_tol)
        if settled.any():
            s_bad = max(s_bad, float(np.max((lo + w)[settled])))
        cut = max(s_floor, s_bad)
        keep = bad & ~settled & (lo + w > cut)
        lo, w = lo[keep], w[keep]
        if 2 * len(lo) > max_panels:
            raise CertificationError(
                f"insufficient grid resolution: {2 * len(lo)} active panels exceed "
                f"the cap {max_panels} while locating a threshold on [{a}, {b}]")
        half = w / 2
        lo = np.concatenate([lo, lo + half])
        w = np.concatenate([half, half])
    s_star = max(a, s_bad, s_floor)
    return s_star, s_floor
