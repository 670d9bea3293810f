"""Search for smaller band-width constants.

A candidate is a kernel from a :class:`KernelFamily` together with a
:class:`BudgetAllocation`.  Each candidate is scored by running the full
certified chain, so every C in the trace is a certified upper bound.  The
search is coordinate descent over the family parameters and the index into a
grid of budgets, with seeded random restarts once the steps are exhausted.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .certify import CertificationError
from .chains import (EVEN, EVEN_BUDGET, ODD, ODD_BUDGET, PARITIES, P_CHI_DEGREE,
                     BudgetAllocation, ChainReport, even_chain, odd_chain)
from .envelope import sup_abs
from .kernels import H1, H2, CompositeKernel, Kernel, NormalizerKernel, sinc_power_kernel

SINC_POWER = "sinc-power"
CONVEX = "convex-combination"
SPLINE = "spline-spectrum"
KINDS = (SINC_POWER, CONVEX, SPLINE)
MAX_DENOMINATOR = 1024
CUTOFFS = (64.0, 256.0, 1024.0)


@dataclass(frozen=True)
class KernelFamily:
    """A parametrised set of odd band-limited normalizing functions.

    ``sinc-power``: parameters ``(k,)``, an integer in ``[k_min, k_max]``.
    ``convex-combination``: one non-negative weight per entry of ``exponents``.
    ``spline-spectrum``: dilations of a single sinc power, ``sum_j w_j h_k(a_j t)``
    with ``a_1 = 1``; parameters are ``(w_1..w_J, a_2..a_J)``.  The Fourier
    profile is then a sum of dilated B-splines, piecewise polynomial on
    ``[-k pi, k pi]``.
    """

    kind: str
    parameters: Tuple[float, ...]
    exponents: Tuple[int, ...] = ()
    k_min: int = 3
    k_max: int = 16

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        p = tuple(float(x) for x in self.parameters)
        object.__setattr__(self, "parameters", p)
        if self.kind == SINC_POWER:
            if len(p) != 1 or not (self.k_min <= p[0] <= self.k_max) or self.k_min < 2:
                raise ValueError("sinc-power family needs one exponent in [k_min, k_max], k_min >= 2")
        elif self.kind == CONVEX:
            if len(p) != len(self.exponents) or not p:
                raise ValueError("convex-combination needs one weight per exponent")
            if any(k < 2 for k in self.exponents):
                raise ValueError("exponents must be >= 2")
        else:
            if len(self.exponents) != 1:
                raise ValueError("spline-spectrum needs exactly one exponent")
            if len(p) % 2 == 0:
                raise ValueError("spline-spectrum parameters are (w_1..w_J, a_2..a_J)")

    @property
    def dimension(self) -> int:
        return len(self.parameters)

    def bounds(self) -> List[Tuple[float, float]]:
        if self.kind == SINC_POWER:
            return [(self.k_min, self.k_max)]
        if self.kind == CONVEX:
            return [(0.0, 1.0)] * self.dimension
        J = (self.dimension + 1) // 2
        return [(0.0, 1.0)] * J + [(0.05, 1.0)] * (J - 1)

    def initial_steps(self) -> List[float]:
        if self.kind == SINC_POWER:
            return [1.0]
        return [0.25] * self.dimension

    def min_step(self, i: int) -> float:
        return 1.0 if self.kind == SINC_POWER else 1.0 / 256

    def project(self, params: Sequence[float]) -> Tuple[float, ...]:
        out = []
        for x, (lo, hi) in zip(params, self.bounds()):
            x = min(max(float(x), lo), hi)
            if self.kind == SINC_POWER:
                x = float(round(x))
            else:
                # dyadic grid keeps parameters exactly reproducible
                x = round(x * 1024) / 1024
            out.append(x)
        if self.kind in (CONVEX, SPLINE):
            J = len(out) if self.kind == CONVEX else (len(out) + 1) // 2
            if sum(out[:J]) == 0:
                out[0] = 1.0
        return tuple(out)

    def member(self, params: Sequence[float]) -> Kernel:
        p = self.project(params)
        if self.kind == SINC_POWER:
            return sinc_power_kernel(int(p[0]))
        if self.kind == CONVEX:
            W = math.fsum(p)
            parts = [(w / W, sinc_power_kernel(k)) for w, k in zip(p, self.exponents) if w > 0]
            return _normalise_parts(parts)
        J = (len(p) + 1) // 2
        w, a = p[:J], (1.0,) + p[J:]
        W = math.fsum(w)
        k = self.exponents[0]
        parts = [(wi / W, sinc_power_kernel(k, ai)) for wi, ai in zip(w, a) if wi > 0]
        return _normalise_parts(parts)

    def describe(self) -> str:
        if self.kind == SINC_POWER:
            return f"{SINC_POWER}[{self.k_min}..{self.k_max}]"
        return f"{self.kind}{list(self.exponents)}"


def _normalise_parts(parts) -> Kernel:
    if len(parts) == 1:
        return parts[0][1]
    W = math.fsum(w for w, _ in parts)
    parts = [(w / W, k) for w, k in parts]
    # absorb rounding so the weights sum to one exactly enough for the check
    drift = 1.0 - math.fsum(w for w, _ in parts)
    parts[0] = (parts[0][0] + drift, parts[0][1])
    return CompositeKernel(tuple(parts))


def family_from_spec(spec: str) -> KernelFamily:
    """Parse ``sinc-power``, ``sinc-power:K``, ``convex-combination:8,9,10`` or
    ``spline-spectrum:K:J``."""
    head, _, rest = spec.partition(":")
    head = head.strip()
    if head == SINC_POWER:
        k = int(rest) if rest else 8
        return KernelFamily(SINC_POWER, (k,))
    if head == CONVEX:
        ks = tuple(int(x) for x in rest.split(",")) if rest else (8, 9, 10)
        w = tuple(1.0 if i == 0 else 0.0 for i in range(len(ks)))
        return KernelFamily(CONVEX, w, ks)
    if head == SPLINE:
        bits = [b for b in rest.split(":") if b]
        k = int(bits[0]) if bits else 8
        J = int(bits[1]) if len(bits) > 1 else 2
        w = tuple(1.0 if i == 0 else 0.0 for i in range(J))
        a = tuple(1.0 - (i + 1) / (2 * J) for i in range(J - 1))
        return KernelFamily(SPLINE, w + a, (k,))
    raise ValueError(f"unknown family {spec!r}; expected one of {', '.join(KINDS)}")


# budgets ----------------------------------------------------------------------

def budget_grid(parity: str, degrees: Optional[Sequence[int]] = None,
                max_denominator: int = MAX_DENOMINATOR,
                separation: Fraction = Fraction(1, 3)) -> List[BudgetAllocation]:
    """Feasible budgets that are not dominated: for each degree, the largest
    Fourier fraction with denominator <= ``max_denominator``.

    C is inversely proportional to the Fourier fraction, so the smaller
    fractions for the same degree can never win.  The even degree is the
    degree of the index idempotent and cannot be traded.
    """
    doubling = 1 if parity == EVEN else 2
    if degrees is None:
        degrees = [P_CHI_DEGREE] if parity == EVEN else list(range(9, 26))
    out = []
    for d in degrees:
        cap = Fraction(separation) / (doubling * d)
        frac = cap.limit_denominator(max_denominator)
        if frac > cap:
            # limit_denominator rounds to nearest; step down to stay feasible
            frac = Fraction(math.floor(cap * max_denominator), max_denominator)
            frac = frac.limit_denominator(max_denominator)
            while frac > cap:
                frac -= Fraction(1, max_denominator)
        b = BudgetAllocation(frac, d, Fraction(separation), doubling)
        b.check()
        out.append(b)
    return out


# candidate evaluation -----------------------------------------------------------

def evaluate_candidate(kernel: Kernel, budget: BudgetAllocation, parity: str, *,
                       c_chi_digits: Optional[int] = None,
                       delta_cap: Optional[float] = None,
                       cutoffs: Sequence[float] = CUTOFFS) -> ChainReport:
    """Run the certified chain for an arbitrary kernel and budget.

    The budget is checked before any numerics.  If the tail majorant at the
    default cutoff is too loose, the scan is extended through ``cutoffs``.
    """
    if parity not in PARITIES:
        raise ValueError(f"parity must be even or odd, got {parity!r}")
    budget.check()
    if sup_abs(kernel).value > 2:
        raise CertificationError("candidate violates sup |h| <= 2")
    last = None
    for T in cutoffs:
        try:
            if parity == EVEN:
                return even_chain(None, kernel, budget=budget, c_chi_digits=c_chi_digits,
                                  cutoff_T=T, diagnostics=False)
            return odd_chain(None, kernel, budget.degree, budget=budget, delta_cap=delta_cap,
                             cutoff_T=T)
        except CertificationError as exc:
            last = exc
            if "unreachable below cutoff_T" not in str(exc):
                raise
    raise last


@dataclass
class TraceRecord:
    index: int
    params: Tuple[float, ...]
    budget: Dict[str, object]
    kernel: str
    status: str
    C: Optional[float] = None
    radius: Optional[float] = None
    best_so_far: Optional[float] = None
    message: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "index": self.index, "params": list(self.params), "budget": self.budget,
            "kernel": self.kernel, "status": self.status, "C_over_pi": self.C,
            "radius": self.radius, "best_so_far": self.best_so_far, "message": self.message,
        }, sort_keys=True)


@dataclass
class SearchResult:
    best: ChainReport
    best_params: Tuple[float, ...]
    best_budget: BudgetAllocation
    trace: List[TraceRecord] = field(default_factory=list)
    baseline: Optional[ChainReport] = None

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.trace:
                fh.write(rec.to_json() + "\n")


def _baseline_kernel(parity: str) -> Kernel:
    return H1 if parity == EVEN else H2


def _baseline_budget(parity: str) -> BudgetAllocation:
    return EVEN_BUDGET if parity == EVEN else ODD_BUDGET


class _Evaluator:
    def __init__(self, family, parity, budgets, workers, settings):
        self.family = family
        self.parity = parity
        self.budgets = budgets
        self.workers = workers
        self.settings = settings
        self.cache: Dict[tuple, object] = {}

    def key(self, params, b_idx):
        return (self.family.project(params), b_idx)

    def _run(self, key):
        params, b_idx = key
        try:
            kern = self.family.member(params)
            return evaluate_candidate(kern, self.budgets[b_idx], self.parity, **self.settings)
        except (CertificationError, ValueError) as exc:
            return exc

    def batch(self, keys):
        todo = [k for k in dict.fromkeys(keys) if k not in self.cache]
        if todo:
            if self.workers > 1 and len(todo) > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    results = list(pool.map(self._run, todo))
            else:
                results = [self._run(k) for k in todo]
            # results come back in submission order, so the merge is deterministic
            for k, r in zip(todo, results):
                self.cache[k] = r
        return todo


def minimize_constant(family: KernelFamily, parity: str, iteration_budget: int = 50, *,
                      seed: int = 0, workers: int = 4,
                      budgets: Optional[Sequence[BudgetAllocation]] = None,
                      c_chi_digits: Optional[int] = None,
                      trace_path: Optional[str] = None) -> SearchResult:
    """Coordinate descent for the smallest certified C.

    ``iteration_budget`` caps the number of distinct candidates evaluated.
    The baseline kernel at its standard budget is always evaluated first with the
    same settings, and the search never returns anything worse.
    """
    if parity not in PARITIES:
        raise ValueError(f"parity must be even or odd, got {parity!r}")
    if iteration_budget < 1:
        raise ValueError("iteration_budget must be positive")
    budgets = list(budgets) if budgets is not None else budget_grid(parity)
    if not budgets:
        raise ValueError("empty budget grid")
    settings = {"c_chi_digits": c_chi_digits}
    rng = np.random.default_rng(seed)
    trace: List[TraceRecord] = []
    best = {"C": math.inf, "report": None, "params": None, "budget": None}

    def record(index, params, budget, kernel_label, outcome):
        if isinstance(outcome, ChainReport):
            C = outcome.final_constant.value
            if C < best["C"]:
                best.update(C=C, report=outcome, params=tuple(params), budget=budget)
            rec = TraceRecord(index, tuple(params), budget.to_dict(), kernel_label, "ok", C,
                              outcome.final_constant.radius, best["C"])
        else:
            rec = TraceRecord(index, tuple(params), budget.to_dict(), kernel_label,
                              "infeasible", best_so_far=None if math.isinf(best["C"])
                              else best["C"], message=str(outcome))
        trace.append(rec)

    # the baseline member
    base_budget = _baseline_budget(parity)
    try:
        baseline = evaluate_candidate(_baseline_kernel(parity), base_budget, parity, **settings)
    except CertificationError as exc:
        baseline = exc
    record(0, (), base_budget, _baseline_kernel(parity).label, baseline)

    ev = _Evaluator(family, parity, budgets, workers, settings)
    b_start = next((i for i, b in enumerate(budgets)
                    if b.degree == base_budget.degree), len(budgets) // 2)
    x = list(family.project(family.parameters))
    b_idx = b_start
    steps = family.initial_steps()
    evaluated = 0

    def score(key):
        r = ev.cache[key]
        return r.final_constant.value if isinstance(r, ChainReport) else math.inf

    def consume(keys):
        nonlocal evaluated
        fresh = [k for k in dict.fromkeys(keys) if k not in ev.cache]
        fresh = fresh[:max(0, iteration_budget - evaluated)]
        ev.batch(fresh)
        for k in fresh:
            evaluated += 1
            params, bi = k
            lbl = family.member(params).label if not isinstance(ev.cache[k], Exception) else ""
            record(len(trace), params, budgets[bi], lbl, ev.cache[k])
        return [k for k in keys if k in ev.cache]

    cur = ev.key(x, b_idx)
    consume([cur])
    cur_score = score(cur) if cur in ev.cache else math.inf
    while evaluated < iteration_budget:
        # one sweep: all coordinate moves of the current point, evaluated as a batch
        moves = []
        for i in range(family.dimension):
            for sgn in (1, -1):
                y = list(x)
                y[i] += sgn * steps[i]
                moves.append(ev.key(y, b_idx))
        for db in (1, -1):
            if 0 <= b_idx + db < len(budgets):
                moves.append(ev.key(x, b_idx + db))
        moves = [m for m in dict.fromkeys(moves) if m != cur]
        done = consume(moves)
        improved = False
        for m in done:
            sc = score(m)
            if sc < cur_score:
                cur, cur_score, improved = m, sc, True
        x, b_idx = list(cur[0]), cur[1]
        if improved:
            continue
        shrinkable = [i for i in range(family.dimension) if steps[i] / 2 >= family.min_step(i)]
        if shrinkable:
            for i in shrinkable:
                steps[i] /= 2
            continue
        # restart from a seeded random point not yet evaluated
        lo_hi = family.bounds()
        key = None
        for _ in range(64):
            y = [rng.uniform(lo, hi) for lo, hi in lo_hi]
            k = ev.key(y, int(rng.integers(len(budgets))))
            if k not in ev.cache:
                key = k
                break
        if key is None:
            break  # the reachable grid is exhausted
        consume([key])
        if key in ev.cache and score(key) < cur_score:
            cur, cur_score = key, score(key)
        x, b_idx = list(cur[0]), cur[1]
        steps = family.initial_steps()

    if best["report"] is None:
        msgs = {r.message for r in trace if r.status != "ok"}
        raise CertificationError("no feasible candidate: " + "; ".join(sorted(msgs))[:2000])
    result = SearchResult(best["report"], best["params"], best["budget"], trace,
                          baseline if isinstance(baseline, ChainReport) else None)
    if trace_path:
        result.write_trace(trace_path)
    return result


def recertify(result: SearchResult, family: KernelFamily, parity: str,
              c_chi_digits: Optional[int] = None) -> ChainReport:
    """Independent chain re-run for the winning candidate."""
    if result.best_params == ():
        kernel = _baseline_kernel(parity)
    else:
        kernel = family.member(result.best_params)
    b = result.best_budget
    last = None
    for T in CUTOFFS:
        try:
            if parity == EVEN:
                return even_chain(None, kernel, budget=b, c_chi_digits=c_chi_digits,
                                  cutoff_T=T, diagnostics=False)
            return odd_chain(None, kernel, b.degree, budget=b, cutoff_T=T)
        except CertificationError as exc:
            last = exc
    raise last


__all__ = [
    "BudgetAllocation", "CONVEX", "KINDS", "KernelFamily", "SINC_POWER", "SPLINE",
    "SearchResult", "TraceRecord", "budget_grid", "evaluate_candidate", "family_from_spec",
    "minimize_constant", "recertify",
]
