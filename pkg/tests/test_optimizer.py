import json
import math

import pytest

from bandcert.certify import CertificationError
from bandcert.chains import EVEN, ODD, EVEN_BUDGET
from bandcert.kernels import H1
from bandcert.optimizer import (KernelFamily, budget_grid, evaluate_candidate, family_from_spec,
                                minimize_constant, recertify)


@pytest.fixture(scope="module")
def sinc_search():
    fam = family_from_spec("sinc-power")
    return fam, minimize_constant(fam, EVEN, 30, seed=3)


def test_family_specs():
    assert family_from_spec("sinc-power").bounds() == [(3, 16)]
    assert family_from_spec("convex-combination:8,9,10").dimension == 3
    with pytest.raises(ValueError):
        family_from_spec("wavelets")


def test_singleton_family_returns_baseline():
    fam = family_from_spec("sinc-power:8")
    res = minimize_constant(fam, EVEN, 5, c_chi_digits=2, budgets=[EVEN_BUDGET])
    assert res.best.final_constant.value <= 190
    assert res.best.final_constant.value == res.baseline.final_constant.value


def test_search_never_worse_than_baseline(sinc_search):
    _, res = sinc_search
    assert res.best.final_constant.value <= res.baseline.final_constant.value


def test_best_so_far_non_increasing(sinc_search):
    _, res = sinc_search
    seq = [r.best_so_far for r in res.trace if r.best_so_far is not None]
    assert all(b <= a for a, b in zip(seq, seq[1:]))


def test_recertification(sinc_search):
    fam, res = sinc_search
    again = recertify(res, fam, EVEN)
    c, r = res.best.final_constant, again.final_constant
    assert abs(c.value - r.value) <= c.value - c.lower + r.value - r.lower + 1e-12


def test_trace_is_reproducible(tmp_path):
    fam = family_from_spec("sinc-power")
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    minimize_constant(fam, EVEN, 8, seed=11, workers=4, trace_path=str(p1))
    minimize_constant(fam, EVEN, 8, seed=11, workers=1, trace_path=str(p2))
    assert p1.read_text() == p2.read_text()
    first = json.loads(p1.read_text().splitlines()[0])
    assert first["params"] == [] and first["status"] == "ok"


def test_budget_grid_denominators():
    for parity in (EVEN, ODD):
        for b in budget_grid(parity):
            assert b.fourier_fraction.denominator <= 1024
            assert b.feasible()


def test_odd_search_runs():
    fam = family_from_spec("sinc-power")
    res = minimize_constant(fam, ODD, 6, seed=0)
    assert res.best.final_constant.value <= res.baseline.final_constant.value


def test_infeasible_budget_is_rejected():
    from fractions import Fraction
    from bandcert.chains import BudgetAllocation
    with pytest.raises(ValueError):
        evaluate_candidate(H1, BudgetAllocation(Fraction(1, 2), 5, Fraction(1, 3), 1), EVEN)


def test_bad_arguments():
    fam = family_from_spec("sinc-power")
    with pytest.raises(ValueError):
        minimize_constant(fam, "mixed", 5)
    with pytest.raises(ValueError):
        minimize_constant(fam, EVEN, 0)
