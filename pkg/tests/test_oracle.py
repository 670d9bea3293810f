import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandcert.oracle import (INVERTIBLE, BandedModel, QuasiElement, check_holo, gap_norm_estimate,
                             holo_idempotent, opnorm, partitioned_model, partitioned_pieces,
                             partitioned_vanishing_demo, perturb_check, perturbation_threshold,
                             contour_bounds, random_gapped_model, random_perturbation,
                             random_quasi_idempotent, random_quasi_invertible, sign_proxy,
                             spectral_projection, vanishing_sequence)

seeds = st.integers(0, 2 ** 32 - 1)


def test_exact_projection_is_fixed():
    P = np.diag([1.0, 1.0, 0.0, 0.0])
    e = QuasiElement(P, 0.04, 7)
    assert opnorm(holo_idempotent(e) - P) < 1e-12


def test_validation():
    with pytest.raises(ValueError):
        QuasiElement(np.eye(2), 0.1, 7)
    with pytest.raises(ValueError):
        QuasiElement(np.eye(2), 0.01, 0.5)
    with pytest.raises(ValueError):
        QuasiElement(np.eye(2), 0.01, 7, INVERTIBLE)
    with pytest.raises(ValueError):
        QuasiElement(np.ones((2, 3)), 0.01, 7)
    with pytest.raises(ValueError):
        holo_idempotent(QuasiElement(np.eye(2), 0.01, 7, INVERTIBLE, witness=np.eye(2)))


def test_contour_rejects_bad_spectrum():
    with pytest.raises(ValueError):
        holo_idempotent(QuasiElement(np.diag([0.5, 1.0]), 0.04, 7))


@given(seeds)
def test_holo_idempotent_properties(seed):
    rng = np.random.default_rng(seed)
    e = random_quasi_idempotent(rng)
    h = check_holo(e)
    assert h.idempotence <= 1e-10
    assert h.ok
    assert h.rank == round(np.trace(spectral_projection(e.matrix)).real)


@given(seeds)
def test_perturbation_lemma_both_kinds(seed):
    rng = np.random.default_rng(seed)
    for e in (random_quasi_idempotent(rng), random_quasi_invertible(rng)):
        v = perturb_check(e, random_perturbation(rng, e))
        assert v.same_class and v.path_ok and v.worst_path_defect < e.epsilon


def test_perturbation_rejects_outside_radius():
    rng = np.random.default_rng(0)
    e = random_quasi_idempotent(rng)
    with pytest.raises(ValueError):
        perturb_check(e, random_perturbation(rng, e, fraction=1.5))
    with pytest.raises(ValueError):
        perturb_check(e, 100 * np.eye(e.size))


def test_vanishing_branch():
    e = QuasiElement(np.zeros((3, 3)), 0.04, 7)
    v = perturb_check(e, 1e-4 * np.eye(3))
    assert v.vanishing and v.threshold == pytest.approx(0.04 / 15)


@given(seeds)
def test_quasiinvertibles_are_invertible(seed):
    e = random_quasi_invertible(np.random.default_rng(seed))
    assert np.linalg.cond(e.matrix) < 1e8


def test_contour_bounds():
    nb, db = contour_bounds(0.04, 7)
    assert nb == pytest.approx(8 / 0.6) and db == pytest.approx(2 * 8 * 0.04 / (0.8 * 0.6))


@given(seeds, st.integers(1, 6))
def test_gap_norm_estimate(seed, deg):
    rng = np.random.default_rng(seed)
    m = random_gapped_model(rng)
    region = [i for i in m.gap_region if m.distance_to_complement([i]) > deg * m.band]
    lhs, rhs = gap_norm_estimate(m, rng.standard_normal(deg + 1), region)
    assert lhs <= rhs + 1e-9


def test_gap_norm_precondition():
    m = random_gapped_model(np.random.default_rng(1))
    with pytest.raises(ValueError):
        gap_norm_estimate(m, [0, 0, 1], [m.gap_region[0]])


def test_banded_model_validation():
    with pytest.raises(ValueError):
        BandedModel(np.array([[0, 1], [2, 0]]), 1, [0])
    with pytest.raises(ValueError):
        BandedModel(np.ones((4, 4)), 1, [0])
    m = BandedModel(np.diag([1.0, -2.0, 3.0]), 0, [0, 1])
    assert m.gap == pytest.approx(1.0)


def test_sign_proxy():
    q = sign_proxy(9, 2.0)
    P = np.polynomial.polynomial
    assert P.polyval(2.0, q) == pytest.approx(1.0)
    assert P.polyval(-2.0, q) == pytest.approx(-1.0)
    assert np.all(q[::2] == 0)
    with pytest.raises(ValueError):
        sign_proxy(4, 1.0)


def test_vanishing_sequence_decreases():
    seq, _ = vanishing_sequence()
    assert np.all(np.diff(seq) < 0)
    assert seq[0] > 1.0  # narrow middle: the proxy reaches across it
    assert seq[-1] < 1e-3


def test_zero_proxy_gives_trivial_class():
    m = partitioned_model(8)
    assert partitioned_vanishing_demo(m, [0.0]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("width,degree", [(32, 3), (32, 5), (24, 3)])
def test_grading_and_masking(width, degree):
    m = partitioned_model(width, ramp=16)
    pc = partitioned_pieces(m, sign_proxy(degree, opnorm(m.matrix)))
    assert np.all(pc.q_zplus @ pc.q_zminus == 0)
    assert np.all(pc.q_zminus @ pc.q_zplus == 0)
    assert opnorm(pc.q_plus @ pc.q_plus - pc.q_plus) <= opnorm(pc.q @ pc.q - pc.q) + 1e-12
