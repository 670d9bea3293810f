"""Sinc-power mollified sign functions and their certified evaluation.

Every kernel here has the form

    h(t) = c * integral sinc(pi (beta t - s))^k sgn(s) ds = c * (2 F_k(beta t) - I_k),

where ``F_k(t)`` is the integral of ``sinc(pi u)^k`` over ``(-inf, t]`` and
``I_k`` its total.  ``F_k`` is computed once per exponent on a table of
half-unit Gauss-Legendre panels.  The quadrature error is bounded rigorously:
``sinc(pi u)^k`` is band-limited to ``[-k pi, k pi]`` and bounded by 1, so
Bernstein's inequality gives ``|d^m/du^m| <= (k pi)^m`` for the Gauss-Legendre
remainder.  Beyond the table the tail is split into its mean and an
oscillating part bounded by integration by parts.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import special

from .certify import EPS, LOWER, UPPER, CertifiedValue

PI = math.pi

# Target for the analytic tail remainder beyond the table.
_TAIL_TOL = 1e-12
# Per-panel Gauss-Legendre remainder target.
_PANEL_TOL = 1e-18
_MIN_TABLE = 64.0


def _gl_remainder(n: int, width: float, bandwidth: float) -> float:
    """Gauss-Legendre n-point remainder bound for an integrand with |f^(2n)| <= bandwidth^(2n)."""
    log = ((2 * n + 1) * math.log(width) + 4 * math.lgamma(n + 1) - math.log(2 * n + 1)
           - 3 * math.lgamma(2 * n + 1) + 2 * n * math.log(bandwidth))
    return math.exp(log)


def _choose_rule(k: int) -> Tuple[float, int]:
    bw = k * PI
    for width in (0.5, 0.25, 0.125, 0.0625):
        for n in range(4, 49):
            if _gl_remainder(n, width, bw) <= _PANEL_TOL * width:
                return width, n
    raise ValueError(f"exponent {k} too large for the quadrature table")


def _sinc_power(u: np.ndarray, k: int) -> np.ndarray:
    return np.sinc(u) ** k


def _tail_mean(k: int) -> float:
    """Mean of sin(pi u)^k over a period."""
    if k % 2:
        return 0.0
    return math.comb(k, k // 2) / 2.0 ** k


def _tail(k: int, x: np.ndarray):
    """Center and radius of the integral of sinc(pi u)^k over [x, inf), x > 0."""
    x = np.asarray(x, dtype=float)
    m = _tail_mean(k)
    center = m / ((k - 1) * PI ** k * x ** (k - 1)) if m else np.zeros_like(x)
    radius = 2.0 / (PI ** (k + 1) * x ** k)
    return center, radius * (1 + 8 * EPS) + np.abs(center) * 4 * EPS


@dataclass(frozen=True)
class _Table:
    k: int
    width: float
    nodes: np.ndarray
    weights: np.ndarray
    panel_err: float
    J: float
    cum: np.ndarray
    cum_err: np.ndarray
    half: float
    half_err: float


@functools.lru_cache(maxsize=None)
def _table(k: int) -> _Table:
    if k < 2:
        raise ValueError("tables are built for k >= 2")
    width, n = _choose_rule(k)
    x, w = np.polynomial.legendre.leggauss(n)
    panel_err = _gl_remainder(n, width, k * PI)
    J = _MIN_TABLE
    while 2.0 / (PI ** (k + 1) * J ** k) > _TAIL_TOL:
        J *= 2
    n_panels = int(round(J / width))
    left = np.arange(n_panels) * width
    vals = np.empty(n_panels)
    chunk = 1 << 16
    for s in range(0, n_panels, chunk):
        a = left[s:s + chunk]
        u = a[:, None] + width * (x[None, :] + 1) / 2
        vals[s:s + chunk] = (width / 2) * (_sinc_power(u, k) @ w)
    cum = np.concatenate([[0.0], np.cumsum(vals)])
    idx = np.arange(n_panels + 1)
    # accumulated remainder plus the rounding of a running sum
    abs_cum = np.concatenate([[0.0], np.cumsum(np.abs(vals))])
    cum_err = idx * panel_err + (4 * n * EPS) * abs_cum + idx * EPS * abs_cum
    tc, tr = _tail(k, np.array([J]))
    half = float(cum[-1] + tc[0])
    half_err = float(cum_err[-1] + tr[0] + 2 * EPS * abs(half))
    return _Table(k, width, x, w, panel_err, J, cum, cum_err, half, half_err)


def _half_integral(k: int, x: np.ndarray):
    """Integral of sinc(pi u)^k over [0, x] for x >= 0: (values, radii)."""
    x = np.asarray(x, dtype=float)
    if k == 1:
        si, _ = special.sici(PI * x)
        return si / PI, 1e-15 * (1 + np.abs(si))
    tab = _table(k)
    out = np.empty_like(x)
    rad = np.empty_like(x)
    inside = x < tab.J
    if inside.any():
        xi = x[inside]
        j = np.minimum(np.floor(xi / tab.width).astype(np.int64), len(tab.cum) - 2)
        base = j * tab.width
        part = xi - base
        u = base[:, None] + part[:, None] * (tab.nodes[None, :] + 1) / 2
        partial = (part / 2) * (_sinc_power(u, k) @ tab.weights)
        out[inside] = tab.cum[j] + partial
        rad[inside] = (tab.cum_err[j] + tab.panel_err + 4 * len(tab.nodes) * EPS * np.abs(partial)
                       + 4 * EPS * np.abs(out[inside]))
    if (~inside).any():
        tc, tr = _tail(k, x[~inside])
        out[~inside] = tab.half - tc
        rad[~inside] = tab.half_err + tr + 4 * EPS * np.abs(out[~inside])
    return out, rad


def total_integral(k: int) -> CertifiedValue:
    """Certified enclosure of the integral of sinc(pi u)^k over the real line."""
    if k < 1:
        raise ValueError("exponent must be a positive integer")
    if k == 1:
        return CertifiedValue(1.0, 0.0, anchor="sinc normalization")
    tab = _table(k)
    return CertifiedValue(2 * tab.half, 2 * tab.half_err + 4 * EPS,
                          anchor=f"total integral of sinc(pi u)^{k}")


def sinc_power_antiderivative(k: int, t: float) -> CertifiedValue:
    """Enclosure of F_k(t), the integral of sinc(pi u)^k over (-inf, t]."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"exponent must be a positive integer, got {k!r}")
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    total = total_integral(int(k))
    g, gr = _half_integral(int(k), np.array([abs(t)]))
    half = total.value / 2
    val = half + math.copysign(g[0], t) if t != 0 else half
    return CertifiedValue(float(val), float(total.radius / 2 + gr[0] + 2 * EPS * abs(val)),
                          anchor="F_k(t)")


def _sin_abs_max(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """max |sin(pi x)| over [x0, x1] (x0 <= x1)."""
    peak = np.floor(x1 - 0.5) >= np.ceil(x0 - 0.5)
    m = np.maximum(np.abs(np.sin(PI * x0)), np.abs(np.sin(PI * x1)))
    return np.where(peak, 1.0, np.minimum(1.0, m * (1 + 4 * EPS) + 4 * EPS))


def _sinc_local_bounds(x0: np.ndarray, x1: np.ndarray):
    """Upper bounds of |sinc(pi x)| and |d/dx sinc(pi x)| over [x0, x1]."""
    a = np.where((x0 <= 0) & (x1 >= 0), 0.0, np.minimum(np.abs(x0), np.abs(x1)))
    b = np.maximum(np.abs(x0), np.abs(x1))
    with np.errstate(divide="ignore"):
        s = np.where(a > 0, _sin_abs_max(a, b) / (PI * a), 1.0)
        d = np.where(a > 0, 1.0 / a + 1.0 / (PI * a * a), PI)
    return np.minimum(1.0, s * (1 + 4 * EPS)), np.minimum(PI, d * (1 + 4 * EPS))


@dataclass(frozen=True)
class NormalizerKernel:
    """``t -> c * (2 F_k(scale t) - I_k)``: an odd, band-limited approximate sign."""

    exponent: int
    norm_constant: Union[Fraction, float]
    scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 1:
            raise ValueError(f"exponent must be a positive integer, got {self.exponent!r}")
        if not float(self.norm_constant) > 0:
            raise ValueError("norm_constant must be positive")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale!r}")

    @property
    def bandwidth(self) -> float:
        """Fourier support radius of the unscaled kernel, k*pi."""
        return self.exponent * PI

    @property
    def fourier_radius(self) -> float:
        return self.bandwidth * self.scale

    @property
    def components(self):
        return ((1.0, self),)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        tag = f"sinc^{self.exponent}"
        return tag if self.scale == 1.0 else f"{tag}@{self.scale:g}"

    def rescaled(self, factor: float) -> "NormalizerKernel":
        return NormalizerKernel(self.exponent, self.norm_constant, self.scale * factor, self.name)

    def normalization(self) -> CertifiedValue:
        """c * I_k, which must contain 1 for a normalizing function."""
        tot = total_integral(self.exponent)
        c = float(self.norm_constant)
        return CertifiedValue(c * tot.value, c * tot.radius + 4 * EPS, anchor="h(+inf)")

    def evaluate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        c = float(self.norm_constant)
        g, gr = _half_integral(self.exponent, np.abs(self.scale * t).ravel())
        g = g.reshape(t.shape)
        gr = gr.reshape(t.shape)
        val = 2 * c * np.sign(t) * g
        return val, 2 * c * gr + 4 * EPS * np.abs(val)

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return 2 * float(self.norm_constant) * self.scale * _sinc_power(self.scale * t, self.exponent)

    def curvature_bound(self, t0, t1) -> np.ndarray:
        """Upper bound of |h''| over [t0, t1]."""
        k = self.exponent
        s, d = _sinc_local_bounds(self.scale * np.asarray(t0), self.scale * np.asarray(t1))
        return 2 * float(self.norm_constant) * self.scale ** 2 * k * s ** (k - 1) * d

    def enclose(self, tm, r):
        """``(fm, ferr)``: h lies within ferr of fm on every panel [tm - r, tm + r]."""
        fm, fr = self.evaluate(tm)
        d = self.derivative(tm)
        m2 = self.curvature_bound(tm - r, tm + r)
        return fm, fr + np.abs(d) * r * (1 + 8 * EPS) + 0.5 * m2 * r * r

    def tail_bound(self, T: float) -> float:
        k = self.exponent
        c = float(self.norm_constant)
        Ts = T * self.scale
        # h(+inf) = c I_k is only known to be 1 up to the quadrature radius
        n = self.normalization()
        drift = abs(n.value - 1.0) + n.radius
        if k == 1:
            return 2 * c * 2.0 / (PI ** 2 * Ts) + drift
        return 2 * c / ((k - 1) * PI ** k * Ts ** (k - 1)) * (1 + 8 * EPS) + drift

    def derivative_sup(self) -> float:
        return 2 * float(self.norm_constant) * self.scale


@dataclass(frozen=True)
class CompositeKernel:
    """Weighted sum of normalizer kernels; weights sum to one.

    With equal scales and non-negative weights this is a convex combination
    of sinc powers; with several scales of one exponent the Fourier profile is
    a sum of dilated B-splines, i.e. a piecewise polynomial on ``[-B, B]``.
    """

    parts: Tuple[Tuple[float, NormalizerKernel], ...]
    name: str = ""

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composite kernel needs at least one part")
        total = math.fsum(w for w, _ in self.parts)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")

    @property
    def components(self):
        return self.parts

    @property
    def fourier_radius(self) -> float:
        return max(k.fourier_radius for _, k in self.parts)

    @property
    def bandwidth(self) -> float:
        return self.fourier_radius

    @property
    def scale(self) -> float:
        return 1.0

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return " + ".join(f"{w:.6g}*{k.label}" for w, k in self.parts)

    def rescaled(self, factor: float) -> "CompositeKernel":
        return CompositeKernel(tuple((w, k.rescaled(factor)) for w, k in self.parts), self.name)

    def normalization(self) -> CertifiedValue:
        vals = [k.normalization() for _, k in self.parts]
        v = math.fsum(w * n.value for (w, _), n in zip(self.parts, vals))
        r = math.fsum(abs(w) * n.radius for (w, _), n in zip(self.parts, vals))
        return CertifiedValue(v, r + 8 * EPS, anchor="h(+inf)")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        val = np.zeros(t.shape)
        rad = np.zeros(t.shape)
        for w, k in self.parts:
            v, r = k.evaluate(t)
            val += w * v
            rad += abs(w) * r
        return val, rad + 8 * EPS * np.abs(val)

    def derivative(self, t):
        return sum(w * k.derivative(t) for w, k in self.parts)

    def curvature_bound(self, t0, t1):
        return sum(abs(w) * k.curvature_bound(t0, t1) for w, k in self.parts)

    def enclose(self, tm, r):
        fm, fr = self.evaluate(tm)
        d = self.derivative(tm)
        m2 = self.curvature_bound(tm - r, tm + r)
        return fm, fr + np.abs(d) * r * (1 + 8 * EPS) + 0.5 * m2 * r * r

    def tail_bound(self, T: float) -> float:
        return sum(abs(w) * k.tail_bound(T) for w, k in self.parts) * (1 + 8 * EPS)

    def derivative_sup(self) -> float:
        return sum(abs(w) * k.derivative_sup() for w, k in self.parts)


Kernel = Union[NormalizerKernel, CompositeKernel]


H1 = NormalizerKernel(8, Fraction(315, 151), name="h1")
H2 = NormalizerKernel(3, Fraction(4, 3), name="h2")


def sinc_power_kernel(k: int, scale: float = 1.0) -> NormalizerKernel:
    """The normalized sinc-power kernel of exponent ``k``.

    The exact rational constants 4/3 and 315/151 are used for k = 3 and k = 8; other
    exponents take ``1 / I_k`` from the quadrature.
    """
    if k == 8:
        return H1.rescaled(scale)
    if k == 3:
        return H2.rescaled(scale)
    return NormalizerKernel(k, 1.0 / total_integral(k).value, scale, name=f"sinc{k}")


def kernel_by_name(name: str) -> NormalizerKernel:
    key = name.strip().lower()
    if key == "h1":
        return H1
    if key == "h2":
        return H2
    if key.startswith("sinc"):
        return sinc_power_kernel(int(key[4:]))
    raise ValueError(f"unknown kernel {name!r}; expected h1, h2 or sinc<k>")


def kernel_eval(kernel: Kernel, t: float) -> CertifiedValue:
    """Enclosure of h(scale * t)."""
    t = float(t)
    if math.isinf(t):
        n = kernel.normalization()
        return CertifiedValue(math.copysign(n.value, t), n.radius, anchor="h(+-inf)")
    if math.isnan(t):
        raise ValueError("t is NaN")
    v, r = kernel.evaluate(np.array([t]))
    return CertifiedValue(float(v[0]), float(r[0]), anchor="h(t)")


def tail_majorant(kernel: Kernel, T: float) -> CertifiedValue:
    """Upper bound of sup over |t| >= T of |h(t) - sgn(t)|."""
    T = float(T)
    if not T > 0:
        raise ValueError(f"T must be positive, the tail majorant diverges at {T!r}")
    if math.isinf(T):
        return CertifiedValue(0.0, 0.0, UPPER, anchor="tail at infinity")
    return CertifiedValue(kernel.tail_bound(T), math.inf, UPPER, anchor="sup_{|t|>=T} |h - sgn|")


def derivative_bound(kernel: Kernel) -> CertifiedValue:
    """Upper bound of sup_t |h'(t)|.

    h' = 2 c scale sinc(pi scale t)^k peaks at t = 0, so the bound is attained
    for a single sinc power; for composites it is the triangle inequality.
    """
    up = kernel.derivative_sup() * (1 + 8 * EPS)
    at0 = abs(float(kernel.derivative(np.array([0.0]))[0]))
    return CertifiedValue(up, up - at0, UPPER, anchor="sup |h'|")


def normalization_identity(kernel: Kernel) -> CertifiedValue:
    return kernel.normalization()


def grid_values(kernel: Kernel, ts: Sequence[float]):
    """Columns (t, value, radius) for a plot-ready dump."""
    ts = np.asarray(ts, dtype=float)
    v, r = kernel.evaluate(ts)
    return np.column_stack([ts, v, r])


__all__ = [
    "CertifiedValue", "NormalizerKernel", "CompositeKernel", "Kernel", "H1", "H2", "LOWER",
    "UPPER", "derivative_bound", "kernel_by_name", "kernel_eval", "normalization_identity",
    "sinc_power_antiderivative", "sinc_power_kernel", "tail_majorant", "total_integral",
    "grid_values",
]
