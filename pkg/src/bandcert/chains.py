"""End-to-end constant pipelines.

The even chain bounds the index idempotent, solves the exponential-series
condition for the largest admissible epsilon, and turns the envelope threshold
into a band-width constant C.  The odd chain does the same with the
quasi-exponential g_m and the unitary picture.  ``psc_vanishing_scale`` gives
the propagation omega_0 at which the quantitative index is certified to vanish
under a spectral gap.

Constants C are reported in units of pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from .certify import LOWER, TWO_SIDED, UPPER, CertificationError, CertifiedValue
from .envelope import (A_FROBENIUS, B_ENVELOPE, DEFAULT_CUTOFF, DEFAULT_STEP, certified_sup,
                       p_norm_bound, p_norm_literal, p_operator_norm_diagnostic, sup_abs,
                       threshold_solve, u_envelope)
from .kernels import H1, H2, PI, Kernel
from .quasi_exp import (build_g, literal_delta_bound, minimal_m, sup_abs_g, sup_exp_error)

EVEN, ODD = "even", "odd"
PARITIES = (EVEN, ODD)
TWO_PI = 2 * PI
# degree of the index idempotent as a polynomial in chi
P_CHI_DEGREE = 5


@dataclass(frozen=True)
class GeometryParams:
    """Dimension n of M x R, scalar-curvature floor sigma, band width L."""

    n: int
    sigma: float
    L: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L!r}")

    @property
    def gap(self) -> float:
        return lichnerowicz_gap(self)


def lichnerowicz_gap(geom: GeometryParams) -> float:
    """c = sqrt(n sigma / (n - 1)) / 2."""
    return 0.5 * math.sqrt(geom.n * geom.sigma / (geom.n - 1))


@dataclass(frozen=True)
class BudgetAllocation:
    """How the band width L is split into propagation.

    The kernel's Fourier support is ``fourier_fraction * L``; a degree-d
    polynomial in chi(D) then propagates ``d * fourier_fraction * L``, and the
    doubling of the odd-case localisation lemma needs twice that to fit in the
    separation.
    """

    fourier_fraction: Fraction
    degree: int
    separation_fraction: Fraction = Fraction(1, 3)
    lemma_doubling: int = 1

    def __post_init__(self):
        object.__setattr__(self, "fourier_fraction", Fraction(self.fourier_fraction))
        object.__setattr__(self, "separation_fraction", Fraction(self.separation_fraction))
        if self.fourier_fraction <= 0 or self.separation_fraction <= 0:
            raise ValueError("budget fractions must be positive")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree!r}")
        if self.lemma_doubling not in (1, 2):
            raise ValueError("lemma_doubling must be 1 or 2")

    @property
    def propagation(self) -> Fraction:
        return self.degree * self.fourier_fraction

    def feasible(self) -> bool:
        return self.lemma_doubling * self.propagation <= self.separation_fraction

    def check(self) -> None:
        if not self.feasible():
            raise ValueError(
                f"infeasible budget: {self.lemma_doubling} * {self.degree} * "
                f"{self.fourier_fraction} = {self.lemma_doubling * self.propagation} exceeds "
                f"the separation {self.separation_fraction}")

    def constant_factor(self, bandwidth: float) -> float:
        """C / s* in units of pi: 2 * (bandwidth / pi) / fourier_fraction."""
        return 2.0 * (bandwidth / PI) / float(self.fourier_fraction)

    def to_dict(self) -> dict:
        return {"fourier_fraction": str(self.fourier_fraction), "degree": self.degree,
                "separation_fraction": str(self.separation_fraction),
                "lemma_doubling": self.lemma_doubling}


EVEN_BUDGET = BudgetAllocation(Fraction(1, 15), P_CHI_DEGREE, Fraction(1, 3), 1)
ODD_BUDGET = BudgetAllocation(Fraction(1, 102), 17, Fraction(1, 3), 2)


def _frac_L(q: Fraction) -> str:
    if q.numerator == 1:
        return f"L/{q.denominator}"
    return f"{q.numerator}L/{q.denominator}"


def propagation_entries(budget: BudgetAllocation, parity: str, bandwidth: float):
    factor = budget.constant_factor(bandwidth)
    name = "p_chi" if parity == EVEN else "u_chi, v_chi"
    entries = [
        ("prop chi_L(D)", _frac_L(budget.fourier_fraction)),
        (f"prop {name} (degree {budget.degree})", _frac_L(budget.propagation)),
    ]
    if budget.lemma_doubling == 2:
        entries.append(("localisation doubling", _frac_L(2 * budget.propagation)))
    entries += [
        ("separation of Z_+ and Z_-", _frac_L(budget.separation_fraction)),
        ("envelope argument", f"L/({factor:.6g} pi) * sqrt(n sigma/(n-1))"),
    ]
    return entries


@dataclass
class ChainReport:
    parity: str
    kernel: Kernel
    budget: BudgetAllocation
    propagation_budget: List[Tuple[str, str]]
    intermediate_bounds: Dict[str, CertifiedValue]
    final_constant: CertifiedValue
    notes: List[str] = field(default_factory=list)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def C(self) -> float:
        """Certified C in units of pi."""
        return self.final_constant.value

    def admissible_width(self, geom: GeometryParams) -> float:
        """C sqrt((n-1)/n) / sqrt(sigma), in absolute units."""
        return self.C * PI * math.sqrt((geom.n - 1) / geom.n) / math.sqrt(geom.sigma)

    def verdict(self, geom: GeometryParams) -> bool:
        """True when the band is wide enough for the index to vanish."""
        return geom.L > self.admissible_width(geom)

    def summary(self) -> str:
        return f"C <= {self.C:.6g} pi"


# even case --------------------------------------------------------------------

def _series_factor(c_chi: float) -> float:
    """(e^{2 pi C} - e^{2 pi}) / (C^2 (C - 1)), continuous at C = 1."""
    if c_chi < 1:
        c_chi = 1.0
    x = TWO_PI * (c_chi - 1.0)
    ratio = TWO_PI if x == 0 else math.expm1(x) / (c_chi - 1.0)
    return math.exp(TWO_PI) * ratio / (c_chi * c_chi)


def exponential_series_bound(eps: float, c_chi: float) -> float:
    """(8 C + 4 eps + 2) eps (e^{2 pi C} - e^{2 pi}) / (C^2 (C - 1)), rounded up."""
    v = (8 * c_chi + 4 * eps + 2) * eps * _series_factor(c_chi)
    return v * (1 + 64 * np.finfo(float).eps)


def solve_even_epsilon(c_chi: float, rtol: float = 1e-6) -> CertifiedValue:
    """Largest eps with ``exponential_series_bound(eps, C) < 1``, by bisection.

    The returned value is certified admissible; the true supremum lies within
    ``radius`` above it.
    """
    if not (math.isfinite(c_chi) and c_chi > 0):
        raise ValueError(f"C_chi must be positive, got {c_chi!r}")
    lo, hi = 0.0, 1.0
    while exponential_series_bound(hi, c_chi) < 1:
        hi *= 2
    # a clean positive starting point
    lo = hi
    while exponential_series_bound(lo, c_chi) >= 1:
        lo /= 2
        if lo < 1e-300:
            raise CertificationError(
                "even chain: no eps > 0 satisfies (8C+4eps+2) eps (e^{2 pi C}-e^{2 pi})"
                f"/(C^2 (C-1)) < 1 for C = {c_chi:g}")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if exponential_series_bound(mid, c_chi) < 1:
            lo = mid
        else:
            hi = mid
    return CertifiedValue(lo, hi - lo, LOWER, "largest eps with series bound < 1")


def even_chain(geom: Optional[GeometryParams] = None, kernel: Kernel = H1, *,
               budget: BudgetAllocation = EVEN_BUDGET, c_chi_digits: Optional[int] = 2,
               cutoff_T: float = DEFAULT_CUTOFF, grid_step: float = DEFAULT_STEP,
               s_tol: float = 1e-4, diagnostics: bool = True) -> ChainReport:
    """Even-dimensional band-width constant.

    ``c_chi_digits`` rounds the certified norm bound of p_chi up to that many
    decimals before it enters the series condition (``None`` keeps it raw).
    The series factor is increasing in C, so rounding up stays sound.
    """
    budget.check()
    bounds: Dict[str, CertifiedValue] = {}
    notes: List[str] = []
    pn = p_norm_bound(kernel, cutoff_T=cutoff_T, grid_step=grid_step)
    bounds["p_norm"] = pn.with_anchor("||p_chi|| <= sup_t max of row sums")
    c_chi = pn.value
    if c_chi_digits is not None:
        c_chi = math.ceil(pn.value * 10 ** c_chi_digits) / 10 ** c_chi_digits
        if c_chi < pn.value:
            c_chi += 10.0 ** -c_chi_digits
        notes.append(f"C_chi rounded up to {c_chi_digits} decimals: {c_chi:g}")
    bounds["C_chi"] = CertifiedValue(c_chi, c_chi - pn.lower, UPPER,
                                     "C_chi used in the series condition")
    eps = solve_even_epsilon(c_chi)
    bounds["epsilon_star"] = eps.with_anchor(
        "(8C+4eps+2) eps (e^{2 pi C}-e^{2 pi})/(C^2 (C-1)) < 1")
    series_at = exponential_series_bound(eps.value, c_chi)
    bounds["series_at_epsilon"] = CertifiedValue(series_at, 0.0, UPPER,
                                                 "series bound at eps*, must be < 1")
    s_star = threshold_solve(kernel, eps.value, cutoff_T=cutoff_T, grid_step=grid_step,
                             s_tol=s_tol, anchor="least s with b_f(s) <= eps*")
    bounds["s_star"] = s_star
    b_at = certified_sup(kernel, B_ENVELOPE, s_star.value, cutoff_T=cutoff_T,
                         grid_step=grid_step, anchor="b_f(s*)")
    bounds["b_at_s_star"] = b_at
    factor = budget.constant_factor(kernel.bandwidth)
    C = s_star.scaled(factor) if s_star.value > 0 else CertifiedValue(0.0, 0.0, UPPER)
    final = CertifiedValue(C.value, C.radius, UPPER,
                           f"C = {factor:.6g} pi * s* (units of pi)")
    diag = {}
    if diagnostics:
        diag["p_norm_literal_display"] = p_norm_literal(kernel, cutoff_T=cutoff_T,
                                                        grid_step=grid_step).value
        diag["p_operator_norm_dense_grid"] = p_operator_norm_diagnostic(kernel)
    report = ChainReport(EVEN, kernel, budget,
                         propagation_entries(budget, EVEN, kernel.bandwidth),
                         bounds, final, notes, diag)
    if geom is not None:
        notes.append(f"verdict at n={geom.n}, sigma={geom.sigma:g}, L={geom.L:g}: "
                     f"{'vanishes' if report.verdict(geom) else 'not certified'} "
                     f"(needs L > {report.admissible_width(geom):.6g})")
    return report


# odd case ---------------------------------------------------------------------

def solve_odd_epsilon(delta: float) -> CertifiedValue:
    """Largest eps with (1+delta)(delta+eps)+eps < 1 and delta+eps < 1."""
    if not (0 <= delta < 1):
        raise CertificationError(f"odd chain: delta = {delta:g} must lie in [0, 1)")
    e1 = (1 - delta * (1 + delta)) / (2 + delta)
    e2 = 1 - delta
    e = min(e1, e2)
    if e <= 0:
        raise CertificationError(
            f"odd chain: (1+delta)(delta+eps)+eps < 1 has no eps > 0 at delta = {delta:g}")
    # strict inequalities: step just inside
    lo = e * (1 - 1e-12)
    return CertifiedValue(lo, e - lo, LOWER, "largest eps with (1+d)(d+eps)+eps < 1, d+eps < 1")


def odd_chain(geom: Optional[GeometryParams] = None, kernel: Kernel = H2, m: int = 17, *,
              budget: BudgetAllocation = ODD_BUDGET, delta_cap: Optional[float] = None,
              N: float = 7.0, cutoff_T: float = DEFAULT_CUTOFF,
              grid_step: float = DEFAULT_STEP, s_tol: float = 1e-4) -> ChainReport:
    """Odd-dimensional band-width constant.

    The primary delta is the certified sup of |exp(2 pi i x) - g_m(x)| over the
    certified range of S = (chi + 1)/2 and its mirror.  ``delta_cap`` replaces
    it by a stated cap (after certifying delta below it); use 0.209 to replay
    the published numbers.
    """
    budget.check()
    if budget.degree != m:
        budget = BudgetAllocation(budget.fourier_fraction, m, budget.separation_fraction,
                                  budget.lemma_doubling)
        budget.check()
    bounds: Dict[str, CertifiedValue] = {}
    notes: List[str] = ["g_m is applied to S_chi = (chi + 1)/2"]
    sup_h = sup_abs(kernel, cutoff_T=cutoff_T, grid_step=grid_step)
    bounds["sup_abs_chi"] = sup_h.with_anchor("sup |chi|")
    a = (1.0 - sup_h.value) / 2 - 1e-15
    b = (1.0 + sup_h.value) / 2 + 1e-15
    bounds["S_range_low"] = CertifiedValue(a, 0.0, LOWER, "inf of spec(S_chi)")
    bounds["S_range_high"] = CertifiedValue(b, 0.0, UPPER, "sup of spec(S_chi)")
    d_plus = sup_exp_error(m, (a, b))
    d_minus = sup_exp_error(m, (-b, -a))
    d_val = max(d_plus.value, d_minus.value)
    delta = CertifiedValue(d_val, d_val - max(d_plus.lower, d_minus.lower), UPPER,
                           "delta = sup |exp(2 pi i x) - g_m(x)| over +-spec(S_chi)")
    bounds["delta"] = delta
    bounds["delta_literal_S_sup"] = CertifiedValue(
        literal_delta_bound(b, m), 0.0, UPPER,
        "(2 pi)^m (||S||^m + ||S||^2)/m! at ||S|| = sup spec(S_chi)")
    bounds["delta_literal_S_3_2"] = CertifiedValue(
        literal_delta_bound(1.5, m), 0.0, UPPER,
        "(2 pi)^m (||S||^m + ||S||^2)/m! at ||S|| = 3/2")
    if delta.value >= 1:
        raise CertificationError(f"odd chain: delta = {delta.value:.6g} >= 1 for m = {m}")
    d_used = delta.value
    if delta_cap is not None:
        if delta.value >= delta_cap:
            raise CertificationError(
                f"odd chain: certified delta {delta.value:.6g} is not below the cap {delta_cap:g}")
        d_used = float(delta_cap)
        notes.append(f"delta replaced by the stated cap {delta_cap:g}")
    eps = solve_odd_epsilon(d_used)
    bounds["epsilon_star"] = eps
    target = eps.value / budget.lemma_doubling
    bounds["u_target"] = CertifiedValue(target, 0.0, LOWER,
                                        f"eps*/{budget.lemma_doubling}, localisation factor")
    env = u_envelope(build_g(m).array, name=f"|g{m}(S)-1|")
    s_star = threshold_solve(kernel, target, envelope=env, cutoff_T=cutoff_T,
                             grid_step=grid_step, s_tol=s_tol,
                             anchor=f"least s with sup |g{m}((chi+1)/2) - 1| <= eps*/2")
    bounds["s_star"] = s_star
    bounds["u_at_s_star"] = certified_sup(kernel, env, s_star.value, cutoff_T=cutoff_T,
                                          grid_step=grid_step,
                                          anchor=f"sup_(|t|>=s*) |g{m}(S(t)) - 1|")
    g_sup = sup_abs_g(m, (a, b))
    bounds["sup_abs_g"] = g_sup
    notes.append(f"||g{m}(+-S_chi)|| <= {g_sup.value:.6g}: N = {N:g} "
                 f"{'suffices' if g_sup.value <= N else 'does not suffice'}")
    factor = budget.constant_factor(kernel.bandwidth)
    C = s_star.scaled(factor)
    final = CertifiedValue(C.value, C.radius, UPPER, f"C = {factor:.6g} pi * s (units of pi)")
    report = ChainReport(ODD, kernel, budget,
                         propagation_entries(budget, ODD, kernel.bandwidth),
                         bounds, final, notes)
    if geom is not None:
        notes.append(f"verdict at n={geom.n}, sigma={geom.sigma:g}, L={geom.L:g}: "
                     f"{'vanishes' if report.verdict(geom) else 'not certified'} "
                     f"(needs L > {report.admissible_width(geom):.6g})")
    return report


# vanishing scale --------------------------------------------------------------

@dataclass(frozen=True)
class PscParams:
    epsilon: float
    N: float = 7.0
    kernel: Optional[Kernel] = None
    parity: str = EVEN
    m: Optional[int] = None
    m_interval: Tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        if not (0 < self.epsilon < 0.05):
            raise ValueError(f"epsilon must lie in (0, 1/20), got {self.epsilon!r}")
        if not self.N >= 7:
            raise ValueError(f"N must be >= 7, got {self.N!r}")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be even or odd, got {self.parity!r}")
        if self.kernel is None:
            object.__setattr__(self, "kernel", H1 if self.parity == EVEN else H2)


@dataclass
class PscReport:
    params: PscParams
    u0: CertifiedValue
    target: float
    degree_factor: int
    m: Optional[int]
    omega0: CertifiedValue

    def propagation(self, c: float) -> float:
        return self.omega0.value / math.sqrt(c)

    def check(self, c: float) -> Dict[str, float]:
        """Rescale chi by 2 u0 / sqrt(c) and recertify the vanishing condition on the gap.

        Returns the certified sup of the controlling expression over
        |u| >= sqrt(c)/2, the threshold, and the propagation of the rescaled
        representative (degree times Fourier radius).
        """
        if not c > 0:
            raise ValueError("c must be positive")
        k = self.params.kernel
        scaled = k.rescaled(2 * self.u0.value / math.sqrt(c))
        env = _psc_envelope(self.params, self.m)
        sup = certified_sup(scaled, env, math.sqrt(c) / 2)
        prop = self.degree_factor * scaled.fourier_radius
        return {"c": c, "sup": sup.value, "threshold": self.target,
                "holds": sup.value < self.target, "propagation": prop,
                "omega0_over_sqrt_c": self.propagation(c)}


def _psc_envelope(params: PscParams, m: Optional[int]):
    if params.parity == EVEN:
        return A_FROBENIUS
    return u_envelope(build_g(m).array, name=f"|1-g{m}(S)|")


def psc_vanishing_details(params: PscParams) -> PscReport:
    k = params.kernel
    if params.parity == EVEN:
        target = params.epsilon / (2 * params.N + 1)
        m = None
        degree = P_CHI_DEGREE
    else:
        target = params.epsilon / params.N
        m = params.m if params.m is not None else minimal_m(params.epsilon, params.m_interval)
        degree = m
    env = _psc_envelope(params, m)
    # solve slightly inside the strict threshold so rescaled rechecks keep a margin
    u0 = threshold_solve(k, target * (1 - 1e-6), envelope=env,
                         anchor="least u0 with the vanishing condition for |u| > u0")
    s = k.fourier_radius
    # chi_{2 u0/sqrt(c)} has Fourier radius 2 u0 s/sqrt(c); the representative has degree `degree`
    omega = CertifiedValue(2 * degree * u0.value * s, 2 * degree * u0.radius * s, UPPER,
                           f"omega0 = {2 * degree} u0 s")
    return PscReport(params, u0, target, degree, m, omega)


def psc_vanishing_scale(params: PscParams) -> CertifiedValue:
    """omega_0 with the quantitative index zero at every propagation r >= omega_0/sqrt(c)."""
    return psc_vanishing_details(params).omega0


__all__ = [
    "BudgetAllocation", "ChainReport", "EVEN", "EVEN_BUDGET", "GeometryParams", "ODD",
    "ODD_BUDGET", "PscParams", "PscReport", "even_chain", "exponential_series_bound",
    "lichnerowicz_gap", "odd_chain", "psc_vanishing_details", "psc_vanishing_scale",
    "solve_even_epsilon", "solve_odd_epsilon",
]
