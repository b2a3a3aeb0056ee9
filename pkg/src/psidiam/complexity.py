"""Chaining-complexity functionals for linear index classes.

A class here is always a set of index vectors ``x`` acting on sample points
by ``f_x(X) = <x, X>``.  The module provides the gaussian-width lower proxy,
Dudley entropy-integral upper bounds, a greedy admissible-sequence evaluator
for finite classes, and the weighted-coordinate entropy construction that
bounds the gamma_2 functional of the sphere in the psi_2-proxy metric by a
multiple of sqrt(n).

gamma_2 itself is never claimed exactly: results are (lower proxy, upper
bound) pairs, and inconsistencies are flagged on the estimate rather than
clamped away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, stream
from .ensembles import EnsembleSpec, estimate_Q, sample
from .orlicz import check_alpha, dist_psi_norm

#: Documented constant dividing the measured gaussian width to form the
#: gamma_2 lower proxy (majorizing measures: width <= c * gamma_2).
WIDTH_TO_GAMMA2 = 2.0

_VARIANTS = ("finite", "sphere", "l1-vertices", "weighted-basis")


@dataclass(frozen=True)
class IndexClass:
    """A family of index vectors evaluated by inner products.

    Use the constructors: :meth:`finite`, :meth:`sphere`,
    :meth:`l1_vertices`, :meth:`weighted_basis`.
    """

    variant: str
    n: int
    vectors: np.ndarray | None = field(default=None, compare=False)
    weights: np.ndarray | None = field(default=None, compare=False)
    radius: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown class variant {self.variant!r}")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.variant == "finite":
            v = np.asarray(self.vectors, dtype=float)
            if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] != self.n:
                raise ValueError("finite class needs a nonempty (F, n) array")
            if not np.all(np.isfinite(v)):
                raise ValueError("finite class vectors must be finite")
        if self.variant == "weighted-basis":
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.n,) or np.any(w <= 0):
                raise ValueError("weights must be n positive numbers")

    @classmethod
    def finite(cls, vectors) -> "IndexClass":
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls("finite", v.shape[1], vectors=v)

    @classmethod
    def sphere(cls, n: int, radius: float = 1.0) -> "IndexClass":
        if radius <= 0:
            raise ValueError("radius must be positive")
        return cls("sphere", n, radius=radius)

    @classmethod
    def l1_vertices(cls, n: int) -> "IndexClass":
        return cls("l1-vertices", n)

    @classmethod
    def weighted_basis(cls, weights) -> "IndexClass":
        w = np.asarray(weights, dtype=float)
        return cls("weighted-basis", w.size, weights=w)

    def index_vectors(self) -> np.ndarray:
        """Explicit vector list for the finite-cardinality variants."""
        if self.variant == "finite":
            return np.asarray(self.vectors, dtype=float)
        if self.variant == "l1-vertices":
            eye = np.eye(self.n)
            return np.vstack([eye, -eye])
        if self.variant == "weighted-basis":
            w = np.asarray(self.weights, dtype=float)
            basis = np.diag(w)
            return np.vstack([basis, -basis])
        raise ValueError(f"{self.variant} class is not finite")

    def support_value(self, g: np.ndarray) -> float:
        """sup over class members of <g, x>."""
        if self.variant == "finite":
            return float(np.max(self.vectors @ g))
        if self.variant == "sphere":
            return self.radius * float(np.linalg.norm(g))
        if self.variant == "l1-vertices":
            return float(np.max(np.abs(g)))
        return float(np.max(self.weights * np.abs(g)))


def class_rows(index_class: IndexClass, matrix: np.ndarray) -> np.ndarray:
    """Sample evaluations (f(X_1), ..., f(X_N)) for every class member.

    Only defined for the finite-cardinality variants; rows come back as an
    (F, N) array in the member order of :meth:`IndexClass.index_vectors`.
    """
    return index_class.index_vectors() @ np.asarray(matrix, dtype=float).T


@dataclass(frozen=True)
class WidthEstimate:
    value: float
    stderr: float
    trials: int


def gaussian_width(index_class: IndexClass, trials: int = 200,
                   seed: int = 0) -> WidthEstimate:
    """Monte Carlo gaussian mean width E sup_x <g, x> of the class.

    Evaluated through the exact support function of each variant, so a
    trial costs one gaussian vector regardless of class cardinality.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = stream(seed, 0)
    vals = np.empty(trials)
    for t in range(trials):
        g = rng.standard_normal(index_class.n)
        vals[t] = index_class.support_value(g)
    return WidthEstimate(float(vals.mean()),
                         float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf,
                         trials)


def dudley_upper(covering, diameter: float, levels: int = 12) -> float:
    """Dyadic entropy-integral upper bound sum((eps_{k-1}-eps_k) sqrt(log N)).

    ``covering(eps)`` must return a covering count (>= 1) valid at scale
    eps; scales run from the diameter down by halving through ``levels``
    levels.
    """
    if diameter < 0:
        raise ValueError("diameter must be nonnegative")
    if diameter == 0:
        return 0.0
    total = 0.0
    prev = diameter
    for _ in range(levels):
        eps = prev / 2.0
        count = covering(eps)
        if count < 1:
            raise ValueError(f"covering estimator returned {count} at {eps}")
        total += (prev - eps) * math.sqrt(math.log(count))
        prev = eps
    return total


def _pairwise_dists(points: np.ndarray):
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def _farthest_first(dists: np.ndarray):
    """Greedy traversal order and insertion radii; ties to the lowest index."""
    npts = dists.shape[0]
    order = [0]
    mindist = dists[0].copy()
    radii = [float("inf")]
    for _ in range(npts - 1):
        nxt = int(np.argmax(mindist))
        radii.append(float(mindist[nxt]))
        order.append(nxt)
        np.minimum(mindist, dists[nxt], out=mindist)
    return np.array(order), np.array(radii)


def greedy_covering_estimator(points, metric="l2"):
    """Return (covering(eps), diameter) for a finite point set.

    Covering counts come from one farthest-first traversal: the cover at
    scale eps is the shortest greedy prefix whose next insertion radius is
    already <= eps.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if metric == "l2":
        dists = _pairwise_dists(pts)
    elif callable(metric):
        npts = pts.shape[0]
        dists = np.array([[metric(a, b) for b in pts] for a in pts])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    _, radii = _farthest_first(dists)

    def covering(eps: float) -> int:
        beyond = np.nonzero(radii[1:] > eps)[0]
        return 1 if beyond.size == 0 else int(beyond[-1]) + 2

    return covering, float(dists.max())


def finite_gamma2(points, metric="l2", centers=None) -> float:
    """Greedy admissible-sequence upper bound on gamma_2 of a finite set.

    Level s uses the first min(2^(2^s), count) centers of a farthest-first
    traversal (level 0 is a single center); the value is the worst point's
    sum of 2^(s/2) * dist(point, level-s centers).  Passing ``centers``
    (a points array, e.g. the traversal of a superset) freezes the center
    sequence, which makes subset monotonicity exact.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] > 2048:
        raise ValueError(f"finite_gamma2 capped at 2048 points, got {pts.shape[0]}")
    if callable(metric):
        dist = lambda A, b: np.array([metric(a, b) for a in A])
    elif metric == "l2":
        dist = lambda A, b: np.linalg.norm(A - b, axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if centers is None:
        if callable(metric):
            dists = np.array([[metric(a, b) for b in pts] for a in pts])
        else:
            dists = _pairwise_dists(pts)
        order, _ = _farthest_first(dists)
        centers = pts[order]
    else:
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
    ncen = centers.shape[0]
    total = np.zeros(pts.shape[0])
    s = 0
    while True:
        k = 1 if s == 0 else min(2 ** (2**s), ncen)
        lvl = centers[:k]
        d = np.array([dist(lvl, p).min() for p in pts])
        total += 2 ** (s / 2.0) * d
        if k == ncen:
            break
        s += 1
    return float(total.max())


@dataclass(frozen=True)
class ComplexityEstimate:
    """Bundle of chaining statistics for one class under one ensemble."""

    width: float
    width_se: float
    gamma2_upper: float
    gamma2_lower_proxy: float
    d_psi_alpha: float
    d_L2: float
    alpha: float
    metric: str = "l2"

    @property
    def consistent(self) -> bool:
        """Upper bound at least the lower proxy (flagged, never clamped)."""
        return self.gamma2_upper >= self.gamma2_lower_proxy * (1.0 - 1e-9)


def _sphere_covering(radius: float, n: int):
    def covering(eps: float) -> int:
        # volumetric bound N(r S^{n-1}, eps) <= (1 + 2r/eps)^n, as a count
        val = n * math.log1p(2.0 * radius / eps)
        return int(min(math.exp(min(val, 700.0)), 10**300)) + 1

    return covering


def estimate_complexity(index_class: IndexClass, alpha: float,
                        spec: EnsembleSpec, seed: int = 0,
                        width_trials: int = 200,
                        samples: int = 4096) -> ComplexityEstimate:
    """Measure width, entropy upper bound, and empirical diameters at once.

    The psi_alpha and L2 diameters are taken over the class on a fresh
    sample of the ensemble: exactly (per member) for finite variants,
    via :func:`psidiam.ensembles.estimate_Q` and the sample operator norm
    for the sphere.
    """
    a = check_alpha(alpha)
    w = gaussian_width(index_class, width_trials, derive_seed(seed, 11))
    if index_class.variant == "sphere":
        covering = _sphere_covering(index_class.radius, index_class.n)
        upper = dudley_upper(covering, 2.0 * index_class.radius)
    else:
        vecs = index_class.index_vectors()
        covering, diam = greedy_covering_estimator(vecs)
        upper = dudley_upper(covering, diam)

    sm = sample(spec, samples, derive_seed(seed, 12))
    if index_class.variant == "sphere":
        q = estimate_Q(spec, a, directions=8, samples=samples,
                       seed=derive_seed(seed, 13))
        d_psi = index_class.radius * q.value
        op = float(np.linalg.svd(sm.matrix, compute_uv=False)[0])
        d_l2 = index_class.radius * op / math.sqrt(sm.N)
    else:
        rows = class_rows(index_class, sm.matrix)
        d_psi = max(dist_psi_norm(r, a) for r in rows)
        d_l2 = float(np.max(np.sqrt(np.mean(rows**2, axis=1))))

    return ComplexityEstimate(
        width=w.value,
        width_se=w.stderr,
        gamma2_upper=upper,
        gamma2_lower_proxy=w.value / WIDTH_TO_GAMMA2,
        d_psi_alpha=d_psi,
        d_L2=d_l2,
        alpha=a,
    )


@dataclass(frozen=True)
class UncondGamma2:
    """Entropy-integral estimate for the sphere in the weighted-coordinate
    proxy metric (sum_j (theta^2)*_j w_j^2)^(1/2)."""

    value: float
    ratio_sqrt_n: float
    n: int


def unconditional_psi2_gamma2(n: int, log_weights=None) -> UncondGamma2:
    """Entropy integral for the sphere under the decreasing-weight proxy.

    Covers come from two regimes: coarse scales use sparse block covers —
    at scale w_{2^r} the count is exp(2^r * log(en/2^r)) — and scales below
    twice the smallest weight use the volumetric bound (4 w_n / eps)^n.
    The integral runs over 12 dyadic levels from the proxy diameter 2 w_1.

    Parameters
    ----------
    n : int
        Sphere dimension, at most 1024.
    log_weights : array_like, optional
        Positive non-increasing weights w_1 >= ... >= w_n; defaults to
        w_j = log(en/j), the profile matching psi_2-proxy covers.

    Returns
    -------
    UncondGamma2
    """
    if not 1 <= n <= 1024:
        raise ValueError(f"n must be in [1, 1024], got {n}")
    if log_weights is None:
        w = np.log(math.e * n / np.arange(1, n + 1))
    else:
        w = np.asarray(log_weights, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"need exactly {n} weights")
        if np.any(w <= 0) or np.any(np.diff(w) > 0):
            raise ValueError("weights must be positive and non-increasing")

    block_scales = []  # (scale, log-count)
    r = 0
    while 2**r <= n // 2:
        block_scales.append((float(w[2**r - 1]),
                             (2**r) * math.log(math.e * n / 2**r)))
        r += 1
    w_min = float(w[-1])

    def log_count(eps: float) -> float:
        # volumetric regime: a cover at scale min(eps, 2 w_n) always applies
        best = n * math.log(4.0 * w_min / min(eps, 2.0 * w_min))
        for scale, lc in block_scales:
            if scale <= eps:
                best = min(best, lc)
        return best

    diam = 2.0 * float(w[0])
    total, prev = 0.0, diam
    for _ in range(12):
        eps = prev / 2.0
        total += (prev - eps) * math.sqrt(max(log_count(eps), 0.0))
        prev = eps
    return UncondGamma2(total, total / math.sqrt(n), n)
