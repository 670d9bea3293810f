"""Matrix-scale checks of the quantitative K-theory statements.

Everything here works with dense numpy matrices and the spectral norm.  A
:class:`BandedModel` is a Hermitian matrix with site positions, so that
"propagation" means the largest position gap carried by a nonzero entry.
Polynomials of degree d in a model of band b propagate at most d * b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .quasi_exp import build_g

IDEMPOTENT, INVERTIBLE = "idempotent", "invertible"
P = np.polynomial.polynomial


def opnorm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


# quasielements ------------------------------------------------------------------

@dataclass
class QuasiElement:
    """An (epsilon, r, N)-quasiidempotent or quasiinvertible matrix.

    For the invertible kind a witness ``v`` is required.
    """

    matrix: np.ndarray
    epsilon: float
    N: float
    kind: str = IDEMPOTENT
    prop_bound: Optional[int] = None
    witness: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("matrix must be square")
        if not (0 < self.epsilon < 0.05):
            raise ValueError(f"epsilon must lie in (0, 1/20), got {self.epsilon!r}")
        if not self.N >= 1:
            raise ValueError(f"N must be >= 1, got {self.N!r}")
        if self.kind not in (IDEMPOTENT, INVERTIBLE):
            raise ValueError(f"kind must be idempotent or invertible, got {self.kind!r}")
        if self.kind == INVERTIBLE:
            if self.witness is None:
                raise ValueError("an invertible quasielement needs a witness v")
            self.witness = np.asarray(self.witness, dtype=complex)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def defect(self) -> float:
        """||e^2 - e|| or max(||uv - 1||, ||vu - 1||)."""
        e = self.matrix
        if self.kind == IDEMPOTENT:
            return opnorm(e @ e - e)
        one = np.eye(self.size)
        v = self.witness
        return max(opnorm(e @ v - one), opnorm(v @ e - one))

    def norm_cap(self) -> float:
        e = self.matrix
        if self.kind == IDEMPOTENT:
            return max(opnorm(e), opnorm(np.eye(self.size) - e))
        return max(opnorm(e), opnorm(self.witness))

    def is_valid(self) -> bool:
        return self.defect() < self.epsilon and self.norm_cap() <= self.N


def _check_contour(e: np.ndarray, rho: float) -> np.ndarray:
    lam = np.linalg.eigvals(e)
    near0 = np.abs(lam) < rho
    near1 = np.abs(lam - 1) < rho
    if not np.all(near0 | near1):
        bad = lam[~(near0 | near1)]
        raise ValueError(f"spectrum leaves the two balls of radius {rho:.4g}: {bad[:4]}")
    return lam


def holo_idempotent(e: QuasiElement, nodes: int = 256) -> np.ndarray:
    """The Riesz idempotent f_0(e) by the trapezoid rule on |z - 1| = sqrt(eps).

    f_0 vanishes on the ball around 0, so only the circle around 1
    contributes.  The trapezoid rule on a circle converges geometrically.
    """
    if e.kind != IDEMPOTENT:
        raise ValueError("holo_idempotent needs an idempotent-kind quasielement")
    rho = math.sqrt(e.epsilon)
    a = e.matrix
    _check_contour(a, rho)
    n = a.shape[0]
    one = np.eye(n)
    theta = 2 * np.pi * np.arange(nodes) / nodes
    acc = np.zeros((n, n), dtype=complex)
    for th in theta:
        w = rho * np.exp(1j * th)
        # dz / (2 pi i) = w d(theta) / (2 pi)
        acc += w * np.linalg.solve((1 + w) * one - a, one)
    return acc / nodes


def spectral_projection(e: np.ndarray) -> np.ndarray:
    """Riesz projection onto eigenvalues nearer 1 than 0, from an eigendecomposition."""
    lam, V = np.linalg.eig(np.asarray(e, dtype=complex))
    sel = (np.abs(lam - 1) < np.abs(lam)).astype(complex)
    return V @ np.diag(sel) @ np.linalg.inv(V)


def contour_bounds(eps: float, N: float) -> Tuple[float, float]:
    """Bounds on ||f_0(e)|| and ||f_0(e) - e||."""
    s = math.sqrt(eps)
    return (N + 1) / (1 - 2 * s), 2 * (N + 1) * eps / ((1 - s) * (1 - 2 * s))


@dataclass
class HoloCheck:
    idempotence: float
    norm: float
    distance: float
    norm_bound: float
    distance_bound: float
    rank: int
    exact_rank: int

    @property
    def ok(self) -> bool:
        return (self.norm < self.norm_bound and self.distance < self.distance_bound
                and self.rank == self.exact_rank)


def check_holo(e: QuasiElement, nodes: int = 256) -> HoloCheck:
    f = holo_idempotent(e, nodes)
    nb, db = contour_bounds(e.epsilon, e.N)
    exact = spectral_projection(e.matrix)
    return HoloCheck(
        idempotence=opnorm(f @ f - f), norm=opnorm(f), distance=opnorm(f - e.matrix),
        norm_bound=nb, distance_bound=db, rank=int(round(np.trace(f).real)),
        exact_rank=int(round(np.trace(exact).real)))


# perturbation lemma ---------------------------------------------------------------

@dataclass
class PerturbVerdict:
    same_class: bool
    threshold: float
    distance: float
    path_ok: bool
    worst_path_defect: float
    vanishing: bool


def perturbation_threshold(e: QuasiElement) -> float:
    if e.kind == IDEMPOTENT:
        return (e.epsilon - e.defect()) / (2 * e.N + 1)
    return (e.epsilon - e.defect()) / e.N


def perturb_check(e: QuasiElement, f: np.ndarray, samples: int = 100) -> PerturbVerdict:
    """Check that f is a quasielement of the same kind and that the straight
    path from e to f stays inside the class.

    Side conditions: ||f|| <= N, and for idempotents also ||1 - f|| <= N;
    f must lie strictly inside the perturbation radius.  Violations raise
    ``ValueError``, since they are bad input rather than a falsified claim.
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != e.matrix.shape:
        raise ValueError("f must have the shape of e")
    if not e.is_valid():
        raise ValueError("e is not a valid quasielement")
    one = np.eye(e.size)
    if opnorm(f) > e.N:
        raise ValueError(f"side condition ||f|| <= N fails: {opnorm(f):.6g} > {e.N}")
    if e.kind == IDEMPOTENT and opnorm(one - f) > e.N:
        raise ValueError(f"side condition ||1 - f|| <= N fails: {opnorm(one - f):.6g}")
    thr = perturbation_threshold(e)
    dist = opnorm(e.matrix - f)
    if not dist < thr:
        raise ValueError(f"||e - f|| = {dist:.6g} is not below the threshold {thr:.6g}")
    worst = 0.0
    path_ok = True
    for t in np.linspace(0.0, 1.0, samples):
        g = (1 - t) * e.matrix + t * f
        q = QuasiElement(g, e.epsilon, e.N, e.kind, e.prop_bound, e.witness)
        d = q.defect()
        worst = max(worst, d)
        path_ok &= (d < e.epsilon and q.norm_cap() <= e.N * (1 + 1e-12))
    fq = QuasiElement(f, e.epsilon, e.N, e.kind, e.prop_bound, e.witness)
    same = fq.defect() < e.epsilon and fq.norm_cap() <= e.N * (1 + 1e-12)
    if e.kind == IDEMPOTENT:
        vanishing = opnorm(f) < e.epsilon / (2 * e.N + 1)
    else:
        vanishing = opnorm(one - f) < e.epsilon / e.N
    return PerturbVerdict(bool(same), thr, dist, bool(path_ok), worst, bool(vanishing))


# random generators ------------------------------------------------------------------

def random_quasi_idempotent(rng: np.random.Generator, n: int = 8, eps: float = 0.04,
                            N: float = 7.0, target: Optional[float] = None) -> QuasiElement:
    """An exact (non-orthogonal) idempotent plus a norm-controlled perturbation."""
    target = eps * 0.75 if target is None else target
    for _ in range(100):
        k = int(rng.integers(0, n + 1))
        S = np.eye(n) + 0.3 * _unit(rng, n)
        Pm = S @ np.diag([1.0] * k + [0.0] * (n - k)) @ np.linalg.inv(S)
        E = _unit(rng, n)
        scale = target * rng.uniform(0.05, 1.0) / (2 * opnorm(Pm) + 1)
        e = QuasiElement(Pm + scale * E, eps, N)
        while e.defect() >= target:
            scale /= 2
            e = QuasiElement(Pm + scale * E, eps, N)
        if e.is_valid():
            return e
    raise RuntimeError("could not draw an admissible quasiidempotent")


def random_quasi_invertible(rng: np.random.Generator, n: int = 8, eps: float = 0.04,
                            N: float = 7.0) -> QuasiElement:
    for _ in range(100):
        u = np.eye(n) + 0.5 * _unit(rng, n) + 1j * 0.3 * _unit(rng, n)
        v = np.linalg.inv(u) + eps * rng.uniform(0.05, 0.4) * _unit(rng, n) / max(1.0, opnorm(u))
        q = QuasiElement(u, eps, N, INVERTIBLE, witness=v)
        if q.is_valid():
            return q
    raise RuntimeError("could not draw an admissible quasiinvertible")


def random_perturbation(rng: np.random.Generator, e: QuasiElement,
                        fraction: Optional[float] = None) -> np.ndarray:
    """A matrix strictly inside the perturbation radius of e."""
    thr = perturbation_threshold(e)
    fraction = rng.uniform(0.0, 0.99) if fraction is None else fraction
    return e.matrix + fraction * thr * _unit(rng, e.size)


def _unit(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X / opnorm(X)


def quasi_exp_pair(S: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """(g_m(S), g_m(-S)) for a Hermitian matrix S."""
    g = build_g(m)
    return g.matrix_eval(S), g.matrix_eval(-np.asarray(S))


# banded models ------------------------------------------------------------------------

@dataclass
class BandedModel:
    """Hermitian matrix D with site positions and a gap-certified index set U.

    ``gap`` is the smallest |eigenvalue| of the compression of D to U,
    computed by a dense eigensolve when not supplied.
    """

    matrix: np.ndarray
    band: int
    gap_region: np.ndarray
    gap: Optional[float] = None
    positions: Optional[np.ndarray] = None
    labels: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        D = np.asarray(self.matrix, dtype=complex)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(D, D.conj().T, atol=1e-12):
            raise ValueError("matrix must be Hermitian")
        self.matrix = D
        n = D.shape[0]
        self.positions = np.arange(n) if self.positions is None else np.asarray(self.positions)
        if self.positions.shape != (n,):
            raise ValueError("one position per index")
        self.gap_region = np.asarray(sorted(set(int(i) for i in self.gap_region)), dtype=int)
        ii, jj = np.nonzero(np.abs(D) > 0)
        reach = int(np.max(np.abs(self.positions[ii] - self.positions[jj]))) if len(ii) else 0
        if reach > self.band:
            raise ValueError(f"entries reach distance {reach} beyond the band {self.band}")
        if self.gap is None:
            self.gap = self.certified_gap()

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def compression(self, idx=None) -> np.ndarray:
        idx = self.gap_region if idx is None else np.asarray(idx)
        return self.matrix[np.ix_(idx, idx)]

    def certified_gap(self) -> float:
        if len(self.gap_region) == 0:
            return 0.0
        return float(np.min(np.abs(np.linalg.eigvalsh(self.compression()))))

    def distance_to_complement(self, region) -> float:
        region = np.asarray(region, dtype=int)
        outside = np.setdiff1d(np.arange(self.dimension), self.gap_region)
        if len(outside) == 0:
            return math.inf
        pr = self.positions[region][:, None]
        po = self.positions[outside][None, :]
        return float(np.min(np.abs(pr - po)))


def poly_matrix(coeffs, D: np.ndarray) -> np.ndarray:
    """Horner evaluation of an ascending coefficient list at a matrix."""
    n = D.shape[0]
    one = np.eye(n)
    c = list(coeffs)
    out = c[-1] * one
    for ck in reversed(c[:-1]):
        out = out @ D + ck * one
    return out


def sup_abs_on_intervals(coeffs, intervals) -> float:
    """max |p| over a union of closed real intervals (endpoints plus critical points)."""
    c = np.asarray(coeffs, dtype=float)
    crit = P.polyroots(P.polyder(c)) if len(c) > 2 else np.array([])
    crit = crit[np.abs(crit.imag) < 1e-12].real if len(crit) else crit
    best = 0.0
    for a, b in intervals:
        pts = [a, b] + [x for x in np.atleast_1d(crit) if a <= x <= b]
        best = max(best, float(np.max(np.abs(P.polyval(np.array(pts), c)))))
    return best


def gap_norm_estimate(model: BandedModel, poly, region) -> Tuple[float, float]:
    """``(||p(D) 1_R||, sup{|p(y)| : c <= |y| <= ||D_UU||})``.

    R must sit deeper than deg(p) * band inside the gap region, so that
    p(D) acts on R exactly as p of the compression does.
    """
    coeffs = np.atleast_1d(np.asarray(poly, dtype=float))
    deg = len(coeffs) - 1
    region = np.asarray(region, dtype=int)
    if len(region) == 0:
        raise ValueError("empty region")
    if not set(region.tolist()) <= set(model.gap_region.tolist()):
        raise ValueError("region must lie inside the gap region")
    depth = model.distance_to_complement(region)
    if not depth > deg * model.band:
        raise ValueError(f"region is at distance {depth:g} from the complement of the gap "
                         f"region, needs more than deg * band = {deg * model.band}")
    pD = poly_matrix(coeffs, model.matrix)
    lhs = opnorm(pD[:, region])
    R = opnorm(model.compression())
    c = model.gap
    rhs = sup_abs_on_intervals(coeffs, [(-R, -c), (c, R)]) if R >= c else abs(coeffs[0])
    return lhs, rhs


def random_gapped_model(rng: np.random.Generator, n: int = 48, band: int = 2,
                        gap_width: int = 36, mass: float = 2.0,
                        hop: float = 0.5) -> BandedModel:
    """Random Hermitian banded matrix whose middle block carries a planted gap."""
    H = np.zeros((n, n), dtype=complex)
    for k in range(1, band + 1):
        z = rng.standard_normal(n - k) + 1j * rng.standard_normal(n - k)
        H += np.diag(z, k)
    H = H + H.conj().T
    H *= hop / max(opnorm(H), 1e-300)
    d = rng.uniform(-1, 1, n)
    start = (n - gap_width) // 2
    U = np.arange(start, start + gap_width)
    d[U] = mass * np.where(np.arange(gap_width) % 2 == 0, 1.0, -1.0) * rng.uniform(1, 1.5, gap_width)
    return BandedModel(H + np.diag(d), band, U)


# partitioned models -------------------------------------------------------------------

def graded_operator(B: np.ndarray) -> np.ndarray:
    n = B.shape[0]
    Z = np.zeros((n, n), dtype=complex)
    return np.block([[Z, B.conj().T], [B, Z]])


def partitioned_model(width: int, band: int = 1, ends: int = 6, hop: float = 0.1,
                      mass: float = 1.0, ramp: Optional[int] = None) -> BandedModel:
    """Graded D = [[0, B*], [B, 0]] on a line of ``2 * ends + width * band`` sites.

    B = m(x) + hop * shift^band.  The mass vanishes on the two end regions
    (labels ``Z-`` and ``Z+``) and grows linearly into the middle region ``A``
    until depth ``ramp`` (default: half the largest demo width), so wider
    middles carry larger local gaps.  ``M+`` is the right half of the line.
    """
    w = width * band
    n = 2 * ends + w
    ramp = ramp if ramp is not None else 16 * band
    x = np.arange(n)
    depth = np.minimum(x - ends + 1, ends + w - x)
    m = np.where((x >= ends) & (x < ends + w), mass * np.minimum(1.0, depth / ramp), 0.0)
    B = np.diag(m).astype(complex) + hop * np.eye(n, k=band)
    D = graded_operator(B)
    pos = np.concatenate([x, x])
    A = np.where((x >= ends) & (x < ends + w))[0]
    zm, zp = np.where(x < ends)[0], np.where(x >= ends + w)[0]
    plus = np.where(x >= n // 2)[0]
    both = lambda idx: np.concatenate([idx, idx + n])
    labels = {"A": both(A), "Z-": both(zm), "Z+": both(zp), "M+": both(plus),
              "sites": np.array([n])}
    return BandedModel(D, band, both(A), positions=pos, labels=labels)


def sign_proxy(degree: int, R: float) -> np.ndarray:
    """Odd polynomial of the given odd degree approximating sgn on [-R, R].

    The normalised integral of (1 - u^2)^j, rescaled to [-R, R]; it equals
    +-1 exactly at +-R and is monotone in between.
    """
    if degree < 1 or degree % 2 == 0:
        raise ValueError("degree must be odd and positive")
    j = (degree - 1) // 2
    base = P.polypow([1.0, 0.0, -1.0], j)
    integ = P.polyint(base)
    integ = integ / P.polyval(1.0, integ)
    scale = np.array([R ** -k for k in range(len(integ))])
    return integ * scale


def _index_blocks(p_entries, n):
    return np.block([[p_entries[0][0], p_entries[0][1]], [p_entries[1][0], p_entries[1][1]]])


def index_idempotent(model: BandedModel, proxy) -> np.ndarray:
    """p_chi(D) for chi(D) = proxy(D), assembled from the grading blocks."""
    D = model.matrix
    n = D.shape[0] // 2
    X = poly_matrix(proxy, D)
    one = np.eye(2 * n)
    Y = X @ X
    a = one - Y
    e11 = (a @ a)[:n, :n]
    e12 = (X @ a)[:n, n:]
    e21 = (X @ (2 * one - Y) @ a)[n:, :n]
    e22 = (Y @ (2 * one - Y))[n:, n:]
    return np.block([[e11, e12], [e21, e22]])


def _mask(idx, size):
    m = np.zeros(size)
    m[idx] = 1.0
    return np.diag(m)


def _site_mask(model: BandedModel, label_or_idx):
    """Mask on the index-matrix space (two copies of the model space)."""
    idx = model.labels[label_or_idx] if isinstance(label_or_idx, str) else label_or_idx
    N2 = model.dimension
    half = N2 // 2
    sites = np.asarray(idx) % half
    m = np.zeros(half)
    m[sites] = 1.0
    # the index matrix p has four n x n blocks, each indexed by sites
    return np.diag(np.concatenate([m, m]))


@dataclass
class PartitionedPieces:
    p: np.ndarray
    q: np.ndarray
    q_plus: np.ndarray
    q_zplus: np.ndarray
    q_zminus: np.ndarray
    p_plus: np.ndarray


def partitioned_pieces(model: BandedModel, proxy) -> PartitionedPieces:
    """q = p 1_Z + diag(0, 1_A) and its half-space and end-region restrictions."""
    p = index_idempotent(model, proxy)
    n = model.dimension // 2
    size = 2 * n
    # p acts on (chi-block 1, chi-block 2), each of size n; masks act on sites in both
    mZ = _site_mask(model, np.concatenate([model.labels["Z-"], model.labels["Z+"]]))
    mA = _site_mask(model, "A")
    lower = np.diag(np.concatenate([np.zeros(n), np.ones(n)]))
    q = p @ mZ + lower @ mA
    mplus = _site_mask(model, "M+")
    return PartitionedPieces(
        p=p, q=q, q_plus=q @ mplus,
        q_zplus=q @ _site_mask(model, "Z+"), q_zminus=q @ _site_mask(model, "Z-"),
        p_plus=p @ mplus + lower @ (np.eye(size) - mplus))


def partitioned_vanishing_demo(model: BandedModel, proxy, half_space=None) -> float:
    """||exp(2 pi i p_+) - 1|| for the half-space restriction p_+ of the index idempotent.

    ``p_+`` keeps p on the half space and the trivial projection diag(0, 1)
    elsewhere, so it is the identity-class representative away from the cut.
    """
    proxy = np.atleast_1d(np.asarray(proxy, dtype=float))
    if not np.any(proxy):
        p_plus = np.zeros((model.dimension, model.dimension))
    else:
        if half_space is not None:
            model.labels["M+"] = np.asarray(half_space)
        p_plus = partitioned_pieces(model, proxy).p_plus
    return opnorm(expm(2j * np.pi * p_plus) - np.eye(p_plus.shape[0]))


def vanishing_sequence(widths: Sequence[int] = (4, 8, 16, 32), degree: int = 9,
                       band: int = 1, **kw) -> Tuple[np.ndarray, list]:
    """Demo norms over a sequence of middle widths with one fixed proxy."""
    models = [partitioned_model(w, band, ramp=max(widths) * band // 2, **kw) for w in widths]
    R = max(opnorm(m.matrix) for m in models)
    proxy = sign_proxy(degree, R)
    return np.array([partitioned_vanishing_demo(m, proxy) for m in models]), models


__all__ = [
    "BandedModel", "HoloCheck", "PerturbVerdict", "QuasiElement", "check_holo",
    "gap_norm_estimate", "holo_idempotent", "index_idempotent", "opnorm",
    "partitioned_model", "partitioned_pieces", "partitioned_vanishing_demo", "perturb_check",
    "perturbation_threshold", "poly_matrix", "contour_bounds", "quasi_exp_pair",
    "random_gapped_model", "random_perturbation", "random_quasi_idempotent",
    "random_quasi_invertible", "sign_proxy", "spectral_projection", "sup_abs_on_intervals",
    "vanishing_sequence",
]
