import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandcert.envelope import (A_FROBENIUS, B_ENVELOPE, EnvelopeQuery, b_envelope, certified_sup,
                               p_norm_bound, p_norm_literal, p_operator_norm_diagnostic, sup_abs,
                               threshold_solve, u_envelope)
from bandcert.kernels import H1, H2
from bandcert.quasi_exp import build_g


def b_pointwise(f):
    a = 1 - f * f
    return max(a * a + a, abs((2 - f * f) * a) + a * a)


def test_b_at_zero_is_three():
    v = b_envelope(EnvelopeQuery(H1, 0.0))
    assert v.contains(3.0) or abs(v.value - 3.0) <= 1e-12


def test_b_at_published_threshold():
    assert b_envelope(EnvelopeQuery(H1, 0.7888)).value <= 1.4108e-5


def test_b_far_out_is_tiny():
    assert b_envelope(EnvelopeQuery(H1, 40.0)).value < 1e-12


def test_p_norm_bounds():
    pn = p_norm_bound(H1)
    assert 1.0 < pn.value < 1.29
    assert p_norm_bound(H2).value >= 1.0
    # the literal display double counts the (1-f^2)^2 entry
    assert p_norm_literal(H1).value > pn.value
    assert 1.0 <= p_operator_norm_diagnostic(H1, n=4001) <= pn.value


def test_sup_abs_overshoot():
    assert sup_abs(H2).value <= 2.0
    assert sup_abs(H1).value <= 2.0


def test_threshold_examples():
    assert threshold_solve(H1, 1.4108e-5).value <= 0.7888
    assert threshold_solve(H1, 3.0).value == 0.0
    env = u_envelope(build_g(17).array)
    assert threshold_solve(H2, 0.169, envelope=env).value <= 0.535


def test_threshold_rejects_bad_targets():
    with pytest.raises(ValueError):
        threshold_solve(H1, 0.0)
    with pytest.raises(ValueError):
        EnvelopeQuery(H1, -1.0)


@given(st.floats(0, 3), st.floats(0, 3))
def test_monotone_in_s(s1, s2):
    s1, s2 = sorted((s1, s2))
    a, b = b_envelope(EnvelopeQuery(H1, s1)), b_envelope(EnvelopeQuery(H1, s2))
    ra = a.value - a.lower if math.isfinite(a.radius) else 0
    assert a.value + ra >= b.lower


@given(st.floats(0, 2), st.integers(0, 2 ** 32 - 1))
def test_oracle_dominance(s, seed):
    bound = b_envelope(EnvelopeQuery(H1, s)).value
    rng = np.random.default_rng(seed)
    ts = s + rng.exponential(1.0, 100)
    f, _ = H1.evaluate(np.concatenate([ts, -ts]))
    assert max(b_pointwise(x) for x in f) <= bound * (1 + 1e-12)


@pytest.mark.parametrize("s", [0.3, 0.7, 1.5])
def test_grid_refinement_soundness(s):
    a = certified_sup(H1, B_ENVELOPE, s, grid_step=1 / 32)
    b = certified_sup(H1, B_ENVELOPE, s, grid_step=1 / 64)
    assert b.value <= a.value + (a.value - a.lower)


@pytest.mark.parametrize("delta", [0.0, 0.01, 0.1])
def test_threshold_consistency(delta):
    target = 1.4108e-5
    s = threshold_solve(H1, target).value
    assert b_envelope(EnvelopeQuery(H1, s + delta)).value <= target


def test_frobenius_envelope_dominates_entries():
    # the Frobenius norm of A bounds its largest entry (1-f^2)^2 + ... at every t
    v = certified_sup(H1, A_FROBENIUS, 1.0)
    f, _ = H1.evaluate(np.linspace(1.0, 5.0, 401))
    a = 1 - f * f
    assert np.max(a * a) <= v.value
