import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bandcert.certify import CertificationError
from bandcert.chains import (EVEN, EVEN_BUDGET, ODD, ODD_BUDGET, BudgetAllocation, GeometryParams,
                             PscParams, even_chain, exponential_series_bound, lichnerowicz_gap,
                             odd_chain, psc_vanishing_details, psc_vanishing_scale,
                             solve_even_epsilon, solve_odd_epsilon)
from bandcert.envelope import SignKernel
from bandcert.kernels import H1, H2


@pytest.fixture(scope="module")
def even():
    return even_chain()


@pytest.fixture(scope="module")
def odd():
    return odd_chain()


def test_even_pipeline(even):
    b = even.intermediate_bounds
    assert b["p_norm"].value < 1.29
    assert b["epsilon_star"].value >= 1.40e-5
    assert b["s_star"].value <= 0.7888
    assert even.final_constant.value <= 190
    assert even.summary().startswith("C <= 189")


def test_even_epsilon_consistency(even):
    c = even.intermediate_bounds["C_chi"].value
    eps = even.intermediate_bounds["epsilon_star"].value
    assert exponential_series_bound(eps, c) < 1
    assert exponential_series_bound(1.01 * eps, c) >= 1


def test_series_continuous_at_one():
    assert math.isfinite(exponential_series_bound(1e-3, 1.0))
    assert abs(exponential_series_bound(1e-3, 1.0) - exponential_series_bound(1e-3, 1 + 1e-9)) < 1e-6


def test_even_budget_scaling():
    doubled = BudgetAllocation(Fraction(1, 30), 5, Fraction(1, 3), 1)
    base = even_chain(diagnostics=False)
    twice = even_chain(budget=doubled, diagnostics=False)
    assert twice.intermediate_bounds["s_star"].value == base.intermediate_bounds["s_star"].value
    assert twice.final_constant.value == pytest.approx(2 * base.final_constant.value)


def test_idealized_sign_kernel_gives_zero():
    assert even_chain(kernel=SignKernel(), diagnostics=False).final_constant.value == 0.0


def test_odd_pipeline(odd):
    b = odd.intermediate_bounds
    assert b["delta"].value < 0.209
    assert b["delta"].value <= b["delta_literal_S_sup"].value
    assert b["epsilon_star"].value >= 0.338
    assert odd.final_constant.value <= 328
    assert any("N = 7 suffices" in n for n in odd.notes)


def test_odd_replays_capped_delta():
    r = odd_chain(delta_cap=0.209)
    assert r.intermediate_bounds["epsilon_star"].value >= 0.338
    assert r.intermediate_bounds["s_star"].value <= 0.535
    assert r.final_constant.value <= 328


def test_odd_low_degree_fails():
    # g_m(-1) moves away from 1 for small m, so the mirrored envelope never reaches the target
    with pytest.raises(CertificationError):
        odd_chain(m=10)


def test_solve_odd_epsilon():
    e = solve_odd_epsilon(0.209).value
    assert (1 + 0.209) * (0.209 + e) + e < 1 and e >= 0.338
    with pytest.raises(CertificationError):
        solve_odd_epsilon(1.2)


def test_solve_even_epsilon_is_lower_bound():
    v = solve_even_epsilon(1.29)
    assert v.side == "lower-bound" and 1.40e-5 <= v.value <= 1.42e-5


def test_budgets():
    assert EVEN_BUDGET.feasible() and ODD_BUDGET.feasible()
    assert EVEN_BUDGET.constant_factor(8 * math.pi) == pytest.approx(240)
    assert ODD_BUDGET.constant_factor(3 * math.pi) == pytest.approx(612)
    with pytest.raises(ValueError):
        BudgetAllocation(Fraction(1, 10), 5, Fraction(1, 3), 1).check()


def test_geometry_validation():
    with pytest.raises(ValueError):
        GeometryParams(1, 1.0)
    with pytest.raises(ValueError):
        GeometryParams(3, 0.0)
    with pytest.raises(ValueError):
        GeometryParams(3, 1.0, -1.0)
    assert lichnerowicz_gap(GeometryParams(4, 2.0)) == pytest.approx(math.sqrt(4 * 2.0 / 3) / 2)


@given(st.integers(2, 50), st.floats(0.01, 100))
def test_scale_covariance(n, sigma):
    base = _cached_even()
    w1 = base.admissible_width(GeometryParams(n, sigma))
    w2 = base.admissible_width(GeometryParams(n, 2 * sigma))
    assert w2 == pytest.approx(w1 / math.sqrt(2), rel=1e-12)


_CACHE = {}


def _cached_even():
    if "even" not in _CACHE:
        _CACHE["even"] = even_chain(diagnostics=False)
    return _CACHE["even"]


def test_verdict():
    base = _cached_even()
    geom = GeometryParams(3, 1.0, 1000.0)
    assert base.verdict(geom)
    assert not base.verdict(GeometryParams(3, 1.0, 10.0))


@pytest.mark.parametrize("parity", [EVEN, ODD])
def test_psc_scale_ignores_geometry(parity):
    fields = set(PscParams.__dataclass_fields__)
    assert not fields & {"n", "sigma", "L", "geom"}
    w = psc_vanishing_scale(PscParams(0.04, 7, parity=parity))
    assert math.isfinite(w.value) and w.value > 0


def test_psc_checks():
    rep = psc_vanishing_details(PscParams(0.04, 7, parity=EVEN))
    for c in (0.5, 1.0, 2.0):
        chk = rep.check(c)
        assert chk["holds"]
        assert chk["propagation"] == pytest.approx(rep.omega0.value / math.sqrt(c), rel=1e-9)


def test_psc_validation():
    with pytest.raises(ValueError):
        PscParams(0.06)
    with pytest.raises(ValueError):
        PscParams(0.01, N=3)
