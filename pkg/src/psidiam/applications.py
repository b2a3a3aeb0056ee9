"""Geometric consequences: operator norms, shrinking, kernel sections.

A sample matrix acts as the random operator sending x to the vector of
scalar products with the rows.  This module measures how that operator
deforms convex bodies:

- :func:`operator_norm` evaluates the body-to-l_p operator norm, exactly
  whenever the body/exponent pair admits it (singular value, vertex or
  row-wise reductions) and by a tagged sampled lower bound otherwise;
- :func:`shrinking_experiment` tracks the diameter of the image of a body
  under the row-normalized operator against the sqrt(k/n) prediction;
- :func:`low_mstar_experiment` computes exact kernel-section diameters of
  ellipsoids and compares them with a fixed-point radius built from the
  width of the body at small scales;
- :func:`sphere_process_experiment` races the sphere-class deviation
  against three candidate rates and reports which one the data tracks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, stream
from .complexity import IndexClass, gaussian_width
from .concentration import sup_deviation
from .ensembles import EnsembleSpec, estimate_Q, sample

__all__ = [
    "RandomOperator",
    "BodySpec",
    "OperatorNorm",
    "ShrinkRow",
    "ShrinkingTable",
    "LowMstarRow",
    "LowMstarTable",
    "SphereRateRow",
    "SphereProcessTable",
    "kernel_basis",
    "operator_norm",
    "shrinking_experiment",
    "low_mstar_experiment",
    "sphere_process_experiment",
]

_SUPPORTED_P = (2.0, 3.0, 4.0, math.inf)

# A grid cell counts as shrunk once the measured ratio to sqrt(k/n) times
# the body diameter falls below this; frozen on the calibration run.
PLATEAU_C = 2.0


@dataclass(frozen=True)
class RandomOperator:
    """The sample rows viewed as a linear map R^n -> R^N."""

    matrix: np.ndarray
    scaling: str = "raw"  # or "rows-over-sqrt-n"

    @classmethod
    def from_sample(cls, sm, normalize: bool = False) -> "RandomOperator":
        mat = np.array(sm.matrix, dtype=float)
        if normalize:
            return cls(mat / math.sqrt(mat.shape[1]), "rows-over-sqrt-n")
        return cls(mat, "raw")

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class BodySpec:
    """A centrally symmetric body the operator acts on.

    Variants: ``euclidean-ball`` and ``l1-ball`` with a radius,
    ``ellipsoid`` with a positive-definite shape matrix S (the body is
    {x : x' S x <= 1}, semiaxes are the reciprocal square roots of the
    eigenvalues), and ``finite-points``.
    """

    variant: str
    n: int
    radius: float = 1.0
    shape: np.ndarray | None = field(default=None, compare=False)
    points: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def euclidean_ball(cls, n: int, radius: float = 1.0) -> "BodySpec":
        if n < 1 or radius <= 0:
            raise ValueError("need n >= 1 and radius > 0")
        return cls("euclidean-ball", n, radius)

    @classmethod
    def l1_ball(cls, n: int, radius: float = 1.0) -> "BodySpec":
        if n < 1 or radius <= 0:
            raise ValueError("need n >= 1 and radius > 0")
        return cls("l1-ball", n, radius)

    @classmethod
    def ellipsoid(cls, shape) -> "BodySpec":
        s = np.asarray(shape, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("shape matrix must be square")
        if not np.allclose(s, s.T, atol=1e-12):
            raise ValueError("shape matrix must be symmetric")
        if np.linalg.eigvalsh(s)[0] <= 0:
            raise ValueError("shape matrix must be positive definite")
        return cls("ellipsoid", s.shape[0], shape=s)

    @classmethod
    def finite_points(cls, points) -> "BodySpec":
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise ValueError("need a nonempty finite point set")
        return cls("finite-points", p.shape[1], points=p)

    def semiaxes(self) -> np.ndarray:
        if self.variant != "ellipsoid":
            raise ValueError("semiaxes are only defined for ellipsoids")
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.shape))

    def l2_radius(self) -> float:
        if self.variant in ("euclidean-ball", "l1-ball"):
            return self.radius
        if self.variant == "ellipsoid":
            return float(self.semiaxes().max())
        return float(np.linalg.norm(self.points, axis=1).max())

    def diameter(self) -> float:
        if self.variant == "finite-points":
            p = self.points
            diff = p[:, None, :] - p[None, :, :]
            return float(np.sqrt((diff**2).sum(axis=2)).max())
        return 2.0 * self.l2_radius()


@dataclass(frozen=True)
class OperatorNorm:
    value: float
    method: str
    p: float


def _check_p(p) -> float:
    pf = float(p)
    if pf not in _SUPPORTED_P:
        raise ValueError(f"p must be one of 2, 3, 4 or inf, got {p}")
    return pf


def _vec_p_norm(y: np.ndarray, p: float) -> float:
    return float(np.linalg.norm(y, ord=np.inf if math.isinf(p) else p))


def _sampled_lower_ball(mat: np.ndarray, p: float, samples: int,
                        seed: int) -> float:
    """Lower bound on sup over the unit ball of the l_p image norm.

    Candidates: top singular directions, random points, and a few rounds
    of the dual fixed-point map x -> normalize(M' |Mx|^(p-1) sgn(Mx)),
    which climbs the objective from the best candidate found.
    """
    n = mat.shape[1]
    _, _, vt = np.linalg.svd(mat, full_matrices=False)
    rng = stream(derive_seed(seed, 13), 0)
    cand = rng.standard_normal((samples, n))
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    cand = np.vstack([vt[: min(3, vt.shape[0])], cand])
    vals = np.linalg.norm(mat @ cand.T, ord=p, axis=0)
    best = cand[int(np.argmax(vals))]
    best_val = float(vals.max())
    for _ in range(12):
        y = mat @ best
        grad = mat.T @ (np.sign(y) * np.abs(y) ** (p - 1.0))
        norm = np.linalg.norm(grad)
        if norm == 0:
            break
        best = grad / norm
        best_val = max(best_val, _vec_p_norm(mat @ best, p))
    return best_val


def _inv_sqrt(shape: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(shape)
    return q @ np.diag(1.0 / np.sqrt(w)) @ q.T


def kernel_basis(mat: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the kernel of ``mat`` (columns), via full SVD."""
    mat = np.asarray(mat, dtype=float)
    _, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > s.max() * 1e-12)) if s.size and s.max() > 0 else 0
    return vt[rank:].T


def operator_norm(op, body: BodySpec, p, samples: int = 2048,
                  seed: int = 0) -> OperatorNorm:
    """Norm of the operator from the body's gauge to l_p on the sample side.

    Exact evaluations: euclidean ball at p=2 (largest singular value) and
    p=inf (largest row norm); ellipsoids likewise after the shape-matrix
    square-root substitution; l1 balls at every p (vertex maximum over
    columns); finite point sets at every p.  The remaining ball/ellipsoid
    pairs (p in {3, 4}) return a sampled lower bound tagged as such.
    """
    pf = _check_p(p)
    mat = op.matrix if isinstance(op, RandomOperator) else np.asarray(
        op, dtype=float)
    if mat.shape[1] != body.n:
        raise ValueError(f"operator acts on R^{mat.shape[1]}, body on R^{body.n}")
    if body.variant == "l1-ball":
        per_col = np.linalg.norm(mat, ord=np.inf if math.isinf(pf) else pf,
                                 axis=0)
        return OperatorNorm(body.radius * float(per_col.max()),
                            "exact-vertices", pf)
    if body.variant == "finite-points":
        imgs = mat @ body.points.T
        vals = np.linalg.norm(imgs, ord=np.inf if math.isinf(pf) else pf,
                              axis=0)
        return OperatorNorm(float(vals.max()), "exact-points", pf)
    # ball or ellipsoid: reduce the ellipsoid to the ball
    if body.variant == "ellipsoid":
        eff = mat @ _inv_sqrt(body.shape)
        scale = 1.0
    else:
        eff = mat
        scale = body.radius
    if pf == 2.0:
        top = float(np.linalg.svd(eff, compute_uv=False)[0])
        return OperatorNorm(scale * top, "exact-svd", pf)
    if math.isinf(pf):
        rows = float(np.linalg.norm(eff, axis=1).max())
        return OperatorNorm(scale * rows, "exact-rows", pf)
    lower = _sampled_lower_ball(eff, pf, samples, seed)
    return OperatorNorm(scale * lower, "sampled-lower", pf)


def _image_diameter(A: np.ndarray, body: BodySpec) -> float:
    if body.variant == "l1-ball":
        return 2.0 * body.radius * float(np.linalg.norm(A, axis=0).max())
    imgs = A @ body.points.T
    diff = imgs[:, :, None] - imgs[:, None, :]
    return float(np.sqrt((diff**2).sum(axis=0)).max())


def _body_width_class(body: BodySpec) -> IndexClass:
    if body.variant == "l1-ball":
        return IndexClass.l1_vertices(body.n)
    return IndexClass.finite(body.points)


@dataclass(frozen=True)
class ShrinkRow:
    k: int
    in_regime: bool
    ratio_mean: float
    ratio_se: float


@dataclass(frozen=True)
class ShrinkingTable:
    rows: tuple[ShrinkRow, ...]
    kprime: float
    q2: float
    diam_body: float
    plateau_onset: int | None


def shrinking_experiment(spec: EnsembleSpec, body: BodySpec, k_grid,
                         trials: int = 20, seed: int = 0) -> ShrinkingTable:
    """Diameter of the image under rows/sqrt(n) against sqrt(k/n) shrinking.

    Per k the operator takes k sample rows scaled by 1/sqrt(n); the
    reported ratio is diam(A K) / (sqrt(k/n) diam(K)).  The predicted
    onset of the plateau is kprime = q2 * width(K) / l2-radius(K) with q2
    the measured worst-direction subgaussian constant of the ensemble.
    Cells with k > n fall outside the shrinking regime and are reported
    with ``in_regime`` False.
    """
    if body.variant not in ("l1-ball", "finite-points"):
        raise ValueError("shrinking needs an l1-ball or finite-points body")
    if spec.n != body.n:
        raise ValueError("ensemble and body dimensions differ")
    n = spec.n
    diam = body.diameter()
    if body.variant == "l1-ball" and body.radius != 1.0:
        width = body.radius * gaussian_width(
            IndexClass.l1_vertices(n), 400, derive_seed(seed, 2)).value
    else:
        width = gaussian_width(_body_width_class(body), 400,
                               derive_seed(seed, 2)).value
    q2 = estimate_Q(spec, 2.0, seed=derive_seed(seed, 4)).value
    kprime = q2 * width / body.l2_radius()

    rows = []
    for idx, k in enumerate(k_grid):
        k = int(k)
        if k < 1:
            raise ValueError("k must be positive")
        ratios = []
        for tr in range(trials):
            sm = sample(spec, k, derive_seed(seed, 100 * (idx + 1) + tr))
            A = sm.matrix / math.sqrt(n)
            ratios.append(_image_diameter(A, body)
                          / (math.sqrt(k / n) * diam))
        rows.append(ShrinkRow(k, k <= n, float(np.mean(ratios)),
                              float(np.std(ratios) / math.sqrt(trials))))

    onset = None
    regime = [r for r in rows if r.in_regime]
    for j, row in enumerate(regime):
        if all(r.ratio_mean <= PLATEAU_C for r in regime[j:]):
            onset = row.k
            break
    return ShrinkingTable(tuple(rows), kprime, q2, diam, onset)


def _ellipsoid_cut_width(axes: np.ndarray, r: float, gauss: np.ndarray,
                         tau_grid: np.ndarray) -> float:
    """Mean width of (ellipsoid with the given semiaxes) cut to the r-ball.

    Splits every gaussian draw g into u + v and takes the best split of
    the two support functions ||axes * u|| + r ||v|| along the stationary
    family v = g * a^2 / (a^2 + tau); the endpoints tau = 0, infinity
    recover the pure-ball and pure-ellipsoid values.
    """
    a2 = axes**2
    # (draws, taus, n)
    denom = a2[None, None, :] + tau_grid[None, :, None]
    v = gauss[:, None, :] * a2[None, None, :] / denom
    u = gauss[:, None, :] - v
    f = (np.sqrt((a2[None, None, :] * u**2).sum(axis=2))
         + r * np.sqrt((v**2).sum(axis=2)))
    ends = np.minimum(r * np.linalg.norm(gauss, axis=1),
                      np.sqrt((a2[None, :] * gauss**2).sum(axis=1)))
    return float(np.mean(np.minimum(f.min(axis=1), ends)))


def _rstar(axes: np.ndarray, N: int, gauss: np.ndarray, q2: float = 1.0,
           steps: int = 40) -> float:
    """Fixed-point radius: smallest r with q2 * width(K cut to rB) <= r sqrt(N).

    The q2 factor turns the plain gaussian width into the subgaussian
    complexity surrogate, matching the bound conventions elsewhere.
    """
    tau_grid = np.logspace(-8, 8, 49)
    hi = float(axes.max())
    if q2 * _ellipsoid_cut_width(axes, hi, gauss, tau_grid) > hi * math.sqrt(N):
        return hi  # no crossing inside the body: report the radius itself
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid == 0.0:
            break
        if (q2 * _ellipsoid_cut_width(axes, mid, gauss, tau_grid)
                <= mid * math.sqrt(N)):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class LowMstarRow:
    N: int
    diam_mean: float
    diam_min: float
    diam_max: float
    rstar: float
    ratio: float  # diam_mean / (2 * rstar)


@dataclass(frozen=True)
class LowMstarTable:
    rows: tuple[LowMstarRow, ...]
    decay_ok: bool  # per-trial diameters non-increasing in N


def low_mstar_experiment(spec: EnsembleSpec, body: BodySpec, N_grid,
                         trials: int = 10, seed: int = 0,
                         width_draws: int = 256) -> LowMstarTable:
    """Exact kernel-section diameters of an ellipsoid against the r* proxy.

    Every trial draws one sample at the largest N and reuses its prefixes
    for the smaller cells, so the kernels are nested and the per-trial
    diameters are non-increasing in N by construction -- ``decay_ok``
    asserts exactly that.  The diameter of the section is
    2 / sqrt(smallest eigenvalue of V' S V) for an orthonormal kernel
    basis V.
    """
    if body.variant == "euclidean-ball":
        body = BodySpec.ellipsoid(np.eye(body.n) / body.radius**2)
    if body.variant != "ellipsoid":
        raise ValueError("kernel sections are exact for ellipsoids only")
    if spec.n != body.n:
        raise ValueError("ensemble and body dimensions differ")
    Ns = sorted(int(N) for N in N_grid)
    if Ns[0] < 1 or Ns[-1] >= body.n:
        raise ValueError("need 1 <= N < n for a nontrivial kernel")

    axes = np.sort(body.semiaxes())[::-1]
    gauss = stream(derive_seed(seed, 21), 0).standard_normal(
        (width_draws, body.n))
    q2 = estimate_Q(spec, 2.0, seed=derive_seed(seed, 22)).value
    per_trial = np.empty((trials, len(Ns)))
    for tr in range(trials):
        sm = sample(spec, Ns[-1], derive_seed(seed, 500 + tr))
        for j, N in enumerate(Ns):
            V = kernel_basis(sm.matrix[:N])
            lam_min = float(np.linalg.eigvalsh(V.T @ body.shape @ V)[0])
            per_trial[tr, j] = 2.0 / math.sqrt(lam_min)
    decay_ok = bool(np.all(np.diff(per_trial, axis=1) <= 1e-9))

    rows = []
    for j, N in enumerate(Ns):
        rs = _rstar(axes, N, gauss, q2)
        dm = float(per_trial[:, j].mean())
        rows.append(LowMstarRow(N, dm, float(per_trial[:, j].min()),
                                float(per_trial[:, j].max()), rs,
                                dm / (2.0 * rs) if rs > 0 else math.inf))
    return LowMstarTable(tuple(rows), decay_ok)


@dataclass(frozen=True)
class SphereRateRow:
    N: int
    empirical: float
    rate_plain: float      # sqrt(n/N)
    rate_log: float        # sqrt(n/N) * log(eN/n)
    rate_nlogn: float      # sqrt(n log n / N)


@dataclass(frozen=True)
class SphereProcessTable:
    n: int
    rows: tuple[SphereRateRow, ...]
    bands: dict[str, float]  # rate name -> max/min of empirical/rate
    tracked: str             # rate with the narrowest band


def sphere_process_experiment(spec: EnsembleSpec, N_grid, trials: int = 20,
                              seed: int = 0) -> SphereProcessTable:
    """Race the sphere-class deviation against three candidate rates."""
    n = spec.n
    if n < 2:
        raise ValueError("need n >= 2 for distinct candidate rates")
    if any(int(N) < n for N in N_grid):
        raise ValueError("rate comparison needs N >= n in every cell")
    cls = IndexClass.sphere(n)
    rows = []
    for N in N_grid:
        N = int(N)
        vals = [sup_deviation(sample(spec, N, derive_seed(seed, 300 * N + j)),
                              cls).value for j in range(trials)]
        emp = float(np.mean(vals))
        rows.append(SphereRateRow(
            N, emp, math.sqrt(n / N),
            math.sqrt(n / N) * math.log(math.e * N / n),
            math.sqrt(n * math.log(n) / N),
        ))
    bands = {}
    for name in ("plain", "log", "nlogn"):
        ratios = [r.empirical / getattr(r, f"rate_{name}") for r in rows]
        bands[name] = max(ratios) / min(ratios)
    tracked = min(bands, key=bands.get)
    return SphereProcessTable(n, tuple(rows), bands, tracked)
