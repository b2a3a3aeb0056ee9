"""Deviation of empirical second moments and the bounds that predict it.

The measured quantity is the worst relative second-moment error of the
sample over an index class: for linear functionals this is either the
operator norm of (1/N) X^T X - Sigma (sphere class, exact by eigensolve)
or a maximum over finitely many members.  Three bound evaluators predict
its size from a complexity proxy and a tail diameter; a symmetrization
check compares raw and sign-flipped tails trial by trial; and
scaling_study sweeps grids and fits rates.

Population second moments are analytic for the generative ensembles
(c * identity); user-supplied matrices must bring their own.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed, stream
from .complexity import IndexClass, class_rows, gaussian_width
from .ensembles import (
    EnsembleSpec,
    bulk_sample,
    estimate_Q,
    exp_power_std,
    l1_ball_scale,
    sample,
)

__all__ = [
    "DeviationValue",
    "DeviationRecord",
    "BoundValue",
    "LogInflatedBound",
    "SymmetrizationRow",
    "SymmetrizationTable",
    "ScalingStudy",
    "sup_deviation",
    "bound_psi1",
    "bound_psi2",
    "bound_psi1_log",
    "symmetrization_check",
    "deviation_record",
    "scaling_study",
]


def _coordinate_variance(spec: EnsembleSpec) -> float:
    """Per-coordinate variance of the ensemble (population, exact)."""
    if spec.kind == "user":
        raise ValueError(
            "user ensembles have no analytic second moment; pass population=")
    if spec.kind in ("gaussian", "rademacher") or spec.normalize_isotropic:
        return 1.0
    if spec.kind == "exp_power":
        return exp_power_std(spec.alpha) ** 2
    return 1.0 / l1_ball_scale(spec.n) ** 2


@dataclass(frozen=True)
class DeviationValue:
    value: float
    method: str  # "spectral" | "exact-members"


def sup_deviation(X, index_class: IndexClass,
                  population=None) -> DeviationValue:
    """Worst second-moment deviation of the sample over the class.

    Sphere: the full operator norm of (1/N) X^T X - Sigma via a symmetric
    eigensolve -- no direction sampling involved.  Vector-list classes:
    exact maximum over members of |mean of <x, X_i>^2 - E<x, X>^2|.

    ``population`` overrides the analytic second moment: an (n, n) matrix
    for the sphere, a vector of per-member values otherwise.  Required
    for user-kind samples.
    """
    mat = X.matrix if hasattr(X, "matrix") else np.asarray(X, dtype=float)
    N, n = mat.shape
    if index_class.variant == "sphere":
        if population is None:
            sigma = _coordinate_variance(X.spec) * np.eye(n)
        else:
            sigma = np.asarray(population, dtype=float)
            if sigma.shape != (n, n):
                raise ValueError(f"population must be {n}x{n}")
        dev = mat.T @ mat / N - sigma
        value = float(np.max(np.abs(np.linalg.eigvalsh(dev))))
        return DeviationValue(value, "spectral")
    vecs = index_class.index_vectors()
    rows = vecs @ mat.T
    emp = np.mean(rows**2, axis=1)
    if population is None:
        pop = _coordinate_variance(X.spec) * np.sum(vecs**2, axis=1)
    else:
        pop = np.asarray(population, dtype=float).ravel()
        if pop.size != len(vecs):
            raise ValueError(
                f"population needs {len(vecs)} entries, got {pop.size}")
    value = float(np.max(np.abs(emp - pop))) if len(vecs) else 0.0
    return DeviationValue(value, "exact-members")


@dataclass(frozen=True)
class BoundValue:
    value: float
    linear_term: float
    quadratic_term: float


def bound_psi1(d_psi1: float, gamma2: float, N: int) -> BoundValue:
    """max(d_psi1 * gamma2 / sqrt(N), gamma2^2 / N), both terms reported."""
    if d_psi1 < 0 or gamma2 < 0 or N < 1:
        raise ValueError("need d_psi1, gamma2 >= 0 and N >= 1")
    lin = d_psi1 * gamma2 / math.sqrt(N)
    quad = gamma2**2 / N
    return BoundValue(max(lin, quad), lin, quad)


def bound_psi2(d_psi2: float, gamma2_psi2: float, N: int) -> BoundValue:
    """The subgaussian-diameter variant of the same two-term maximum."""
    return bound_psi1(d_psi2, gamma2_psi2, N)


@dataclass(frozen=True)
class LogInflatedBound:
    value: float
    lam: float
    linear_term: float
    quadratic_term: float


def bound_psi1_log(d_psi1: float, gamma2: float, N: int,
                    t: float = 1.0) -> LogInflatedBound:
    """t^2 * max(lambda * gamma2 / sqrt(N), gamma2^2 / N).

    lambda = d_psi1 * max(log(d_psi1 * sqrt(N) / gamma2), 1); the log
    floor engages when gamma2 is comparable to d_psi1 * sqrt(N).
    """
    if d_psi1 < 0 or gamma2 < 0 or N < 1 or t <= 0:
        raise ValueError("need nonnegative inputs, N >= 1 and t > 0")
    if d_psi1 == 0.0 or gamma2 == 0.0:
        lam = d_psi1
    else:
        lam = d_psi1 * max(math.log(d_psi1 * math.sqrt(N) / gamma2), 1.0)
    lin = lam * gamma2 / math.sqrt(N)
    quad = gamma2**2 / N
    return LogInflatedBound(t**2 * max(lin, quad), lam, lin, quad)


@dataclass(frozen=True)
class SymmetrizationRow:
    t: float
    valid: bool  # above the variance threshold sqrt(2 * N) * alpha
    lhs_freq: float
    rhs_freq: float
    slack: float  # 3 combined binomial standard errors
    ok: bool


@dataclass(frozen=True)
class SymmetrizationTable:
    threshold: float
    alpha_var: float
    trials: int
    rows: tuple[SymmetrizationRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows if r.valid)


def symmetrization_check(index_class: IndexClass, spec: EnsembleSpec, N: int,
                         t_grid, trials: int = 1000,
                         seed: int = 0) -> SymmetrizationTable:
    """Tail comparison: raw sums against four times the sign-flipped tail.

    Per trial the left side draws a sample and records
    max over members of |sum_i <x, X_i>|; the right side uses an
    independent sample and independent signs and records
    max |sum_i eps_i <x, X_i>|.  At each grid point t at or above
    sqrt(2 N) * alpha (alpha^2 the largest member variance) the row is
    marked ok when lhs_freq <= 4 * rhs_freq + 3 combined standard
    errors.  Points below the threshold are reported but never asserted.
    """
    if index_class.variant == "sphere":
        raise ValueError("need a vector-list class: both sides must be exact")
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    vecs = index_class.index_vectors()
    c = _coordinate_variance(spec)
    radius = math.sqrt(float(np.max(np.sum(vecs**2, axis=1)))) if len(vecs) \
        else 0.0
    alpha_var = math.sqrt(c) * radius
    threshold = math.sqrt(2.0 * N) * alpha_var

    left = bulk_sample(spec, trials * N, derive_seed(seed, 1))
    right = bulk_sample(spec, trials * N, derive_seed(seed, 2))
    signs = stream(derive_seed(seed, 3), 0).integers(
        0, 2, size=(trials, N)) * 2.0 - 1.0
    lrows = (left @ vecs.T).reshape(trials, N, -1)
    rrows = (right @ vecs.T).reshape(trials, N, -1)
    lhs_stats = np.abs(lrows.sum(axis=1)).max(axis=1)
    rhs_stats = np.abs(np.einsum("tn,tnr->tr", signs, rrows)).max(axis=1)

    rows = []
    for t in t_grid:
        if t <= 0:
            raise ValueError(f"grid t must be positive, got {t}")
        lf = float(np.mean(lhs_stats > t))
        rf = float(np.mean(rhs_stats > t / 4.0))
        se = 3.0 * math.sqrt(lf * (1 - lf) / trials
                             + 16.0 * rf * (1 - rf) / trials)
        ok = lf <= 4.0 * rf + se
        rows.append(SymmetrizationRow(float(t), t >= threshold * (1 - 1e-12),
                                      lf, rf, se, ok))
    return SymmetrizationTable(threshold, alpha_var, trials, tuple(rows))


@dataclass(frozen=True)
class DeviationRecord:
    kind: str
    class_variant: str
    n: int
    N: int
    seed: int
    empirical: float
    empirical_se: float
    method: str
    bound_psi1: float
    bound_psi2: float
    bound_psi1_log: float
    d_psi1: float
    d_psi2: float
    gamma2_proxy: float
    ratio_psi1: float
    ratio_psi2: float
    ratio_psi1_log: float


def deviation_record(spec: EnsembleSpec, index_class: IndexClass, N: int,
                     trials: int = 20, seed: int = 0, t: float = 1.0,
                     measured=None) -> DeviationRecord:
    """Run `trials` seeded samples and attach all three bounds.

    ``measured`` optionally carries precomputed (d_psi1, d_psi2, width)
    so grid sweeps don't re-estimate them per cell.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    vals = []
    for j in range(trials):
        sm = sample(spec, N, derive_seed(seed, 600 + j))
        vals.append(sup_deviation(sm, index_class).value)
    emp = float(np.mean(vals))
    se = float(np.std(vals) / math.sqrt(trials))
    method = sup_deviation(sm, index_class).method

    if measured is None:
        q1 = estimate_Q(spec, 1.0, seed=derive_seed(seed, 7)).value
        q2 = estimate_Q(spec, 2.0, seed=derive_seed(seed, 8)).value
        width = gaussian_width(index_class, 200, derive_seed(seed, 9)).value
    else:
        q1, q2, width = measured
    from .diameters import _class_l2_radius

    radius = _class_l2_radius(index_class)
    d1, d2 = q1 * radius, q2 * radius
    b_a = bound_psi1(d1, width, N).value
    b_p2 = bound_psi2(d2, q2 * width, N).value
    b_c = bound_psi1_log(d1, width, N, t).value
    return DeviationRecord(
        kind=spec.kind, class_variant=index_class.variant, n=spec.n, N=N,
        seed=seed, empirical=emp, empirical_se=se, method=method,
        bound_psi1=b_a, bound_psi2=b_p2, bound_psi1_log=b_c,
        d_psi1=d1, d_psi2=d2, gamma2_proxy=width,
        ratio_psi1=emp / b_a if b_a > 0 else math.inf,
        ratio_psi2=emp / b_p2 if b_p2 > 0 else math.inf,
        ratio_psi1_log=emp / b_c if b_c > 0 else math.inf,
    )


@dataclass(frozen=True)
class ScalingStudy:
    records: tuple[DeviationRecord, ...]
    slopes: dict[tuple[str, int], float]  # (ensemble kind, n) -> dlog(emp)/dlog(N)


def scaling_study(specs_and_classes, N_grid, trials: int = 20, seed: int = 0,
                  t: float = 1.0, budget_s: float | None = None) -> ScalingStudy:
    """Sweep (ensemble, class) pairs over an N grid and fit log-log rates.

    Quantities that depend only on the ensemble and class -- the two tail
    diameters and the width proxy -- are measured once per pair and shared
    across the N cells.  Raises TimeoutError when the wall-clock budget is
    exhausted; partial results are lost, so size grids to the budget.
    """
    t0 = time.monotonic()
    records: list[DeviationRecord] = []
    slopes: dict[tuple[str, int], float] = {}
    for pair_idx, (spec, cls) in enumerate(specs_and_classes):
        pseed = derive_seed(seed, 1000 + pair_idx)
        q1 = estimate_Q(spec, 1.0, seed=derive_seed(pseed, 7)).value
        q2 = estimate_Q(spec, 2.0, seed=derive_seed(pseed, 8)).value
        width = gaussian_width(cls, 200, derive_seed(pseed, 9)).value
        cell_vals = []
        for N in N_grid:
            if budget_s is not None and time.monotonic() - t0 > budget_s:
                raise TimeoutError(
                    f"scaling budget of {budget_s}s exhausted at N={N}")
            rec = deviation_record(spec, cls, int(N), trials,
                                   derive_seed(pseed, int(N)), t,
                                   measured=(q1, q2, width))
            records.append(rec)
            cell_vals.append(rec.empirical)
        if len(N_grid) >= 2:
            coeffs = np.polyfit(np.log(np.asarray(N_grid, dtype=float)),
                                np.log(cell_vals), 1)
            slopes[(spec.kind, spec.n)] = float(coeffs[0])
    return ScalingStudy(tuple(records), slopes)
