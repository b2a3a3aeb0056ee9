"""Coordinate-restricted empirical diameters and their scaling laws.

``D_m`` is the largest Euclidean mass any class member can place on m
coordinates of the sample: sup over f of the top-m norm of
(f(X_1), ..., f(X_N)).  For vector-list classes this is exact by sorting;
for the sphere it is a submatrix singular-value maximization, solved
exactly by enumeration at small (N choose m) and by a seeded greedy
row-selection lower bound beyond that (tagged, never silently mixed with
exact values).

The module also evaluates the two-term theoretical envelope
u * (gamma_2 + d_psi * sqrt(m) * log^(1/alpha)(eN/m)), its l_p cousins with
their crossover, a gaussian lower-bound comparison, the anti-concentration
helper, and the heavy-coordinate optimality experiment showing empirical
sums can beat the gaussian chaining prediction by any constant factor when
N is tiny compared to log n.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed, stream
from .complexity import ComplexityEstimate, IndexClass, class_rows, estimate_complexity, gaussian_width
from .ensembles import EnsembleSpec, sample
from .orlicz import check_alpha

_ENUM_CAP = 10**5

_SUPPORTED_P = (1.0, 1.5, 2.0, 3.0, 4.0)


@dataclass(frozen=True)
class DmEstimate:
    value: float
    method: str  # exact-topm | exact-svd-enum | greedy-lower


def _log_factor(m: int, N: int, alpha: float) -> float:
    return math.log(math.e * N / m) ** (1.0 / alpha)


def _class_l2_radius(index_class: IndexClass) -> float:
    if index_class.variant == "sphere":
        return index_class.radius
    return float(np.max(np.linalg.norm(index_class.index_vectors(), axis=1)))


def _topm_norm(rows: np.ndarray, m: int) -> float:
    sq = rows**2
    if m < rows.shape[1]:
        part = np.partition(sq, sq.shape[1] - m, axis=1)[:, -m:]
    else:
        part = sq
    return float(np.sqrt(part.sum(axis=1).max()))


def _pairs_lambda_max(G: np.ndarray) -> float:
    """Exact max top eigenvalue over all 2x2 principal submatrices."""
    d = np.diag(G)
    i, j = np.triu_indices(G.shape[0], k=1)
    half_sum = 0.5 * (d[i] + d[j])
    half_diff = 0.5 * (d[i] - d[j])
    lam = half_sum + np.sqrt(half_diff**2 + G[i, j] ** 2)
    return float(lam.max())


def _sphere_enum(mat: np.ndarray, m: int) -> float:
    N = mat.shape[0]
    if m == N:
        return float(np.linalg.svd(mat, compute_uv=False)[0])
    if m == 1:
        return float(np.linalg.norm(mat, axis=1).max())
    G = mat @ mat.T
    if m == 2:
        return math.sqrt(_pairs_lambda_max(G))
    best = 0.0
    for idx in itertools.combinations(range(N), m):
        sub = G[np.ix_(idx, idx)]
        best = max(best, float(np.linalg.eigvalsh(sub)[-1]))
    return math.sqrt(best)


def _power_top_vector(A: np.ndarray, v: np.ndarray, iters: int) -> np.ndarray:
    for _ in range(iters):
        w = A @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return v
        v = w / nrm
    return v


def _sphere_greedy_profile(mat: np.ndarray, m_targets, restarts: int = 8,
                           seed: int = 0) -> dict[int, float]:
    """Greedy lower bounds for D_m at every target m from shared passes.

    Each restart grows a row set from a start row, always adding the row
    with the largest component along the running top singular direction
    (tracked by warm-started power iteration on the n x n Gram).  Exact top
    eigenvalues are taken at the checkpoints only.  Values are maximized
    over restarts and cumulatively maximized over m, which preserves the
    lower-bound property since D_m is non-decreasing.
    """
    N, n = mat.shape
    targets = sorted(set(int(m) for m in m_targets))
    if targets[0] < 1 or targets[-1] > N:
        raise ValueError("m targets out of range")
    m_max = targets[-1]
    norms = np.linalg.norm(mat, axis=1)
    starts = [int(np.argmax(norms))]
    for r in range(1, restarts):
        starts.append(int(stream(seed, r).integers(N)))
    best = {m: 0.0 for m in targets}
    for start in starts:
        A = np.outer(mat[start], mat[start])
        chosen = np.zeros(N, dtype=bool)
        chosen[start] = True
        v = mat[start] / (norms[start] if norms[start] > 0 else 1.0)
        k = 1
        ti = 0
        while True:
            while ti < len(targets) and targets[ti] == k:
                lam = float(np.linalg.eigvalsh(A)[-1])
                best[targets[ti]] = max(best[targets[ti]], math.sqrt(lam))
                ev = np.linalg.eigh(A)[1][:, -1]
                v = ev
                ti += 1
            if k == m_max:
                break
            scores = np.abs(mat @ v)
            scores[chosen] = -1.0
            nxt = int(np.argmax(scores))
            chosen[nxt] = True
            A += np.outer(mat[nxt], mat[nxt])
            v = _power_top_vector(A, v, 3)
            k += 1
    running = 0.0
    for m in targets:
        running = max(running, best[m])
        best[m] = running
    return best


def empirical_Dm(X, index_class: IndexClass, m: int, restarts: int = 8,
                 seed: int = 0) -> DmEstimate:
    """The m-coordinate empirical diameter of the class on this sample.

    Vector-list classes are exact (top-m of each member's squared sample
    vector).  The sphere is exact when (N choose m) fits the enumeration
    cap and a greedy lower bound otherwise, with the method tagged.
    """
    mat = X.matrix if hasattr(X, "matrix") else np.asarray(X, dtype=float)
    N = mat.shape[0]
    if not 1 <= m <= N:
        raise ValueError(f"m must be in [1, N]={N}, got {m}")
    if index_class.variant == "sphere":
        if m in (1, 2, N) or math.comb(N, m) <= _ENUM_CAP:
            return DmEstimate(index_class.radius * _sphere_enum(mat, m),
                              "exact-svd-enum")
        prof = _sphere_greedy_profile(mat, [m], restarts, seed)
        return DmEstimate(index_class.radius * prof[m], "greedy-lower")
    rows = class_rows(index_class, mat)
    return DmEstimate(_topm_norm(rows, m), "exact-topm")


@dataclass(frozen=True)
class DmBound:
    """The two-term envelope for D_m, reported as parts, max and sum."""

    gamma2_term: float
    tail_term: float
    bound_max: float
    bound_sum: float


def theoretical_Dm_bound(est: ComplexityEstimate, alpha: float, m: int, N: int,
                         u: float = 1.0) -> DmBound:
    """Evaluate u * (gamma_2 + d_psi_alpha * sqrt(m) * log^(1/a)(eN/m)).

    The gamma_2 slot is filled with the measured gaussian width: the
    bound's absolute constants are unknown, so the evaluator keeps every
    piece explicit and reports ratios downstream rather than asserting
    absolutes.
    """
    a = check_alpha(alpha)
    if not 1 <= m <= N:
        raise ValueError(f"m must be in [1, N]={N}, got {m}")
    if u < 1.0:
        raise ValueError("confidence multiplier u must be >= 1")
    g = u * est.width
    t = u * est.d_psi_alpha * math.sqrt(m) * _log_factor(m, N, a)
    return DmBound(g, t, max(g, t), g + t)


@dataclass(frozen=True)
class DiameterProfile:
    """D_m with bound components along the dyadic m grid."""

    ms: tuple[int, ...]
    values: tuple[float, ...]
    methods: tuple[str, ...]
    gamma2_terms: tuple[float, ...]
    tail_terms: tuple[float, ...]
    ratios: tuple[float, ...]


def dyadic_ms(N: int) -> list[int]:
    out = [1]
    while out[-1] * 2 <= N:
        out.append(out[-1] * 2)
    if out[-1] != N:
        out.append(N)
    return out


def diameter_profile(X, index_class: IndexClass, alpha: float,
                     est: ComplexityEstimate | None = None, u: float = 1.0,
                     restarts: int = 8, seed: int = 0) -> DiameterProfile:
    """Empirical D_m and its envelope across the dyadic m grid.

    For the sphere, greedy passes are shared across all greedy m values of
    the grid (one profile per restart), keeping the whole profile cheap.
    """
    a = check_alpha(alpha)
    mat = X.matrix if hasattr(X, "matrix") else np.asarray(X, dtype=float)
    N = mat.shape[0]
    ms = dyadic_ms(N)
    if est is None:
        if not hasattr(X, "spec"):
            raise ValueError("need a SampleMatrix or an explicit estimate")
        est = estimate_complexity(index_class, a, X.spec,
                                  seed=derive_seed(seed, 31))
    values, methods = [], []
    if index_class.variant == "sphere":
        greedy_ms = [m for m in ms
                     if m not in (1, 2, N) and math.comb(N, m) > _ENUM_CAP]
        prof = (_sphere_greedy_profile(mat, greedy_ms, restarts, seed)
                if greedy_ms else {})
        for m in ms:
            if m in prof:
                values.append(index_class.radius * prof[m])
                methods.append("greedy-lower")
            else:
                values.append(index_class.radius * _sphere_enum(mat, m))
                methods.append("exact-svd-enum")
        # splice the exact anchors into the running max so the profile is
        # monotone even where exact and greedy methods interleave
        running = 0.0
        mono = []
        for v in values:
            running = max(running, v)
            mono.append(running)
        values = mono
    else:
        rows = class_rows(index_class, mat)
        for m in ms:
            values.append(_topm_norm(rows, m))
            methods.append("exact-topm")
    g_terms, t_terms, ratios = [], [], []
    for m, v in zip(ms, values):
        b = theoretical_Dm_bound(est, a, m, N, u)
        g_terms.append(b.gamma2_term)
        t_terms.append(b.tail_term)
        ratios.append(v / b.bound_sum if b.bound_sum > 0 else math.inf)
    return DiameterProfile(tuple(ms), tuple(values), tuple(methods),
                           tuple(g_terms), tuple(t_terms), tuple(ratios))


@dataclass(frozen=True)
class LpDiameter:
    value: float
    bound: float
    regime: str  # "small-I" | "large-I"
    m0: int


def crossover_m0(gamma2: float, d_psi: float, N: int, alpha: float) -> int:
    """Smallest m with gamma2 <= d_psi * sqrt(m) * log^(1/alpha)(eN/m)."""
    a = check_alpha(alpha)
    for m in range(1, N + 1):
        if gamma2 <= d_psi * math.sqrt(m) * _log_factor(m, N, a):
            return m
    return N


def lp_diameter(X, index_class: IndexClass, I_size: int, p: float,
                alpha: float = 1.0, est: ComplexityEstimate | None = None,
                u: float = 1.0, seed: int = 0) -> LpDiameter:
    """sup over f and |I| = I_size of the l_p mass of f's sample vector.

    Exact for vector-list classes only (the sphere has no sorting trick at
    p != 2).  The returned bound follows the small/large crossover: below
    m0 the gamma_2 term carries the factor |I|^(1/p - 1/2), above it the
    plain gamma_2 appears.
    """
    a = check_alpha(alpha)
    if p not in _SUPPORTED_P:
        raise ValueError(f"p must be one of {_SUPPORTED_P}, got {p}")
    if index_class.variant == "sphere":
        raise ValueError("l_p diameters are exact only for vector-list classes")
    mat = X.matrix if hasattr(X, "matrix") else np.asarray(X, dtype=float)
    N = mat.shape[0]
    if not 1 <= I_size <= N:
        raise ValueError(f"I size must be in [1, N]={N}")
    rows = np.abs(class_rows(index_class, mat)) ** p
    if I_size < N:
        part = np.partition(rows, N - I_size, axis=1)[:, -I_size:]
    else:
        part = rows
    value = float(part.sum(axis=1).max() ** (1.0 / p))

    if est is None:
        if not hasattr(X, "spec"):
            raise ValueError("need a SampleMatrix or an explicit estimate")
        est = estimate_complexity(index_class, a, X.spec,
                                  seed=derive_seed(seed, 37))
    gamma2, d = est.width, est.d_psi_alpha
    m0 = crossover_m0(gamma2, d, N, a)
    logw = _log_factor(I_size, N, a)
    if I_size <= m0:
        bound = u * (gamma2 * I_size ** (1.0 / p - 0.5)
                     + d * I_size ** (1.0 / p) * logw)
        regime = "small-I"
    else:
        bound = u * (gamma2 + d * I_size ** (1.0 / p) * logw)
        regime = "large-I"
    return LpDiameter(value, bound, regime, m0)


@dataclass(frozen=True)
class GaussianLowerCheck:
    lhs: float
    rhs: float
    ratio: float


def gaussian_lower_check(index_class: IndexClass, N: int, m: int,
                         trials: int = 50, seed: int = 0) -> GaussianLowerCheck:
    """Monte Carlo E D_m against the gaussian lower-bound proxy.

    The proxy is width(K) + sup_x ||x||_2 * sqrt(8/3) * sqrt(m log(eN/m)):
    under the gaussian ensemble the psi_2 norm of <x, X> is exactly
    sqrt(8/3) ||x||_2.  The ratio lhs/rhs is the recorded constant.
    """
    spec = EnsembleSpec("gaussian", index_class.n)
    vals = []
    for t in range(trials):
        sm = sample(spec, N, derive_seed(seed, 50 + t))
        vals.append(empirical_Dm(sm, index_class, m, seed=derive_seed(seed, t)).value)
    lhs = float(np.mean(vals))
    width = gaussian_width(index_class, 400, derive_seed(seed, 5)).value
    d_psi2 = _class_l2_radius(index_class) * math.sqrt(8.0 / 3.0)
    rhs = width + d_psi2 * math.sqrt(m * math.log(math.e * N / m))
    return GaussianLowerCheck(lhs, rhs, lhs / rhs)


@dataclass(frozen=True)
class OptimalityResult:
    """Blow-up statistics for the weighted-coordinate class at tiny N."""

    sups: tuple[float, ...]
    r_values: tuple[float, ...]
    width_proxy: float
    freq_above: float
    r_target: float
    trial_seeds: tuple[int, ...]


def optimality_experiment(n: int, N: int, alpha: float, trials: int = 200,
                          seed: int = 0, r_target: float = 2.0,
                          width_trials: int = 64) -> OptimalityResult:
    """Ratio of empirical sums to the chaining prediction at tiny N.

    The class is {<e_j, .> / sqrt(log(j+1))}; coordinates are raw
    symmetric exponential-power draws (density proportional to
    exp(-|t|^alpha)).  Each trial reports
    max_j |sum_i Y_ij| / sqrt(log(j+1)) divided by (width proxy) * sqrt(N),
    where the width proxy is the Monte Carlo mean of
    max_j g_j / sqrt(log(j+1)).  In the regime N << log n this ratio
    exceeds any fixed target with sizeable frequency; at N comparable to n
    it stays bounded (the control arm).
    """
    a = check_alpha(alpha)
    if a >= 2.0:
        raise ValueError("alpha must be < 2: at alpha=2 there is no separation")
    if not 1 <= n <= 2**20:
        raise ValueError(f"n must be in [1, 2^20], got {n}")
    if N < 1 or trials < 1:
        raise ValueError("need N >= 1 and trials >= 1")
    weights = 1.0 / np.sqrt(np.log(np.arange(2, n + 2)))
    wrng = stream(derive_seed(seed, 9), 0)
    wvals = [float(np.max(wrng.standard_normal(n) * weights))
             for _ in range(width_trials)]
    width_proxy = float(np.mean(wvals))
    spec = EnsembleSpec("exp_power", n, alpha=a, normalize_isotropic=False)
    sups, rs, tseeds = [], [], []
    denom = width_proxy * math.sqrt(N)
    for t in range(trials):
        ts = derive_seed(seed, 100 + t)
        tseeds.append(ts)
        sm = sample(spec, N, ts)
        sup = float(np.max(np.abs(sm.matrix.sum(axis=0)) * weights))
        sups.append(sup)
        rs.append(sup / denom)
    rs_arr = np.array(rs)
    return OptimalityResult(tuple(sups), tuple(rs), width_proxy,
                            float(np.mean(rs_arr >= r_target)), r_target,
                            tuple(tseeds))


def paley_zygmund(norm_p: float, norm_q: float, p: float, q: float,
                  lam: float) -> float:
    """Anti-concentration: Pr(|Z| >= lam ||Z||_p) from an L_p/L_q ratio.

    Returns ((1 - lam^p) (norm_p/norm_q)^p)^(q/(q-p)), clamped to [0, 1].
    """
    if not (q > p >= 1):
        raise ValueError(f"need q > p >= 1, got p={p}, q={q}")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"need 0 < lambda < 1, got {lam}")
    if not (norm_q >= norm_p > 0):
        raise ValueError("need norm_q >= norm_p > 0")
    val = ((1.0 - lam**p) * (norm_p / norm_q) ** p) ** (q / (q - p))
    return min(max(val, 0.0), 1.0)


@dataclass(frozen=True)
class MomentTable:
    ps: tuple[int, ...]
    mc_norms: tuple[float, ...]
    formula: tuple[float, ...]
    ratios: tuple[float, ...]


def moment_equivalence_check(x, alpha: float, p_grid=(2, 4, 8),
                             trials: int = 20000, seed: int = 0) -> MomentTable:
    """L_p norms of sum x_i Y_i against the split two-term formula.

    The formula is p^(1/alpha) * ||(x_i)_{i<=p}||_{alpha*} +
    sqrt(p) * ||(x_i)_{i>p}||_2 with alpha* the conjugate exponent
    (sup-norm at alpha=1).  Y are raw exponential-power draws.
    """
    a = check_alpha(alpha)
    xs = np.asarray(x, dtype=float).ravel()
    if np.any(xs < 0) or np.any(np.diff(xs) > 0):
        raise ValueError("weights must be nonnegative and non-increasing")
    for p in p_grid:
        if p % 2 or not 2 <= p <= 16:
            raise ValueError(f"p grid must be even integers in [2, 16], got {p}")
    n = xs.size
    spec = EnsembleSpec("exp_power", n, alpha=a, normalize_isotropic=False)
    ps, mcs, fvals, ratios = [], [], [], []
    for k, p in enumerate(p_grid):
        sm = sample(spec, trials, derive_seed(seed, 200 + k))
        s = sm.matrix @ xs
        mc = float(np.mean(np.abs(s) ** p) ** (1.0 / p))
        head = xs[:p]
        tail = xs[p:]
        if a == 1.0:
            head_norm = float(head.max()) if head.size else 0.0
        else:
            astar = a / (a - 1.0)
            head_norm = float(np.sum(head**astar) ** (1.0 / astar))
        formula = (p ** (1.0 / a) * head_norm
                   + math.sqrt(p) * float(np.linalg.norm(tail)))
        ps.append(int(p))
        mcs.append(mc)
        fvals.append(formula)
        ratios.append(mc / formula if formula > 0 else math.inf)
    return MomentTable(tuple(ps), tuple(mcs), tuple(fvals), tuple(ratios))


def subadditivity_union_Dm(X, class_a: IndexClass, class_b: IndexClass,
                           m: int) -> tuple[float, float, float]:
    """D_m of a union of vector-list classes and of its parts (exact)."""
    va = class_a.index_vectors()
    vb = class_b.index_vectors()
    union = IndexClass.finite(np.vstack([va, vb]))
    du = empirical_Dm(X, union, m).value
    da = empirical_Dm(X, class_a, m).value
    db = empirical_Dm(X, class_b, m).value
    return du, da, db
