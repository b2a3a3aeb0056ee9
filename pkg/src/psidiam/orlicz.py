"""Exponential Orlicz norms on empirical measures, plus analytic scalar laws.

The central object is the empirical psi_alpha norm of a vector
``x = (x_1, ..., x_N)``::

    ||x|| = inf{ C > 0 : (1/N) * sum_i exp((|x_i|/C)**alpha) <= 2 }

with ``alpha`` between 1 (exponential tails) and 2 (gaussian tails).  The
module also ships a small family of scalar distributions whose psi_alpha
norms are known in closed form or computable to high accuracy by quadrature;
these serve as exact anchors for the sample-based estimators elsewhere in
the package.

Vectors are plain 1-D numpy arrays throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

_EXP_CLIP = 700.0  # exp() overflow guard for quadrature integrands

#: Calibration constant for the moment-based norm estimator, fixed once so
#: that a standard gaussian at alpha = 2 maps to its exact norm sqrt(8/3).
#: (The population L_p/sqrt(p) ratio of a gaussian peaks at p = 2 with value
#: 1/sqrt(2), and kappa * 1/sqrt(2) = sqrt(8/3).)
KAPPA_MOMENT = math.sqrt(16.0 / 3.0)


def check_alpha(alpha: float) -> float:
    """Validate an Orlicz exponent; returns it unchanged."""
    a = float(alpha)
    if not 1.0 <= a <= 2.0:
        raise ValueError(f"Orlicz exponent must lie in [1, 2], got {alpha}")
    return a


def log_weight(i, N: int, alpha: float):
    """The decreasing weight log^(1/alpha)(e*N/i) for ranks i = 1..N.

    Accepts a scalar or array of ranks.  This is the profile against which
    rearranged coordinates of a bounded-norm vector are controlled.
    """
    a = check_alpha(alpha)
    i = np.asarray(i, dtype=float)
    if np.any(i < 1) or np.any(i > N):
        raise ValueError("rank out of range")
    return np.log(math.e * N / i) ** (1.0 / a)


def empirical_psi_norm(x, alpha: float, rel_tol: float = 1e-10) -> float:
    """Empirical psi_alpha norm of a sample vector.

    Solves ``(1/N) sum exp((|x_i|/C)**alpha) = 2`` for C by bisection.  The
    constraint mean is continuous and strictly decreasing in C, so the root
    is the exact infimum.

    Parameters
    ----------
    x : array_like
        Sample vector; the zero vector maps to 0.
    alpha : float
        Orlicz exponent in [1, 2].
    rel_tol : float
        Relative accuracy of the returned root.

    Returns
    -------
    float
    """
    a = check_alpha(alpha)
    v = np.abs(np.asarray(x, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty sample vector")
    top = float(v.max())
    if top == 0.0:
        return 0.0
    N = v.size
    # Bracket the root: at C = lo the largest summand alone contributes 2N to
    # the sum, so the mean is >= 2; at C = hi every term is <= 2, so the mean
    # is <= 2.  Exponents never exceed log(2N), so no overflow protection is
    # needed inside the loop.
    lo = top / math.log(2.0 * N) ** (1.0 / a)
    hi = top / math.log(2.0) ** (1.0 / a)

    def mean_exp(C: float) -> float:
        return float(np.mean(np.exp((v / C) ** a)))

    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mean_exp(mid) > 2.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rearrange(x) -> np.ndarray:
    """Non-increasing rearrangement of the absolute values of ``x``."""
    v = np.abs(np.asarray(x, dtype=float).ravel())
    return np.sort(v)[::-1]


def dominates(u, v, index_set) -> bool:
    """Whether ``v`` dominates ``u`` restricted to ``index_set``.

    True iff the non-increasing rearrangement of ``u`` restricted to the
    given coordinates sits below the rearrangement of ``v`` termwise:
    ``(u|_I)*_i <= v*_i`` for i = 1..|I|.
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    idx = np.asarray(index_set, dtype=int).ravel()
    if idx.size == 0:
        return True
    if idx.min() < 0 or idx.max() >= u.size:
        raise ValueError("index set out of range for u")
    if idx.size > v.size:
        raise ValueError("index set larger than comparison vector")
    ustar = rearrange(u[idx])
    vstar = rearrange(v)[: idx.size]
    return bool(np.all(ustar <= vstar + 1e-15 * np.maximum(vstar, 1.0)))


def envelope_constant(x, alpha: float) -> float:
    """Smallest c with ``x*_i <= c * ||x|| * log^(1/alpha)(eN/i)`` for all i.

    Computed by direct scan of the ratio over ranks.  For well-behaved
    samples this stays bounded by a small absolute constant; the value is
    reported, not clamped.
    """
    a = check_alpha(alpha)
    xs = rearrange(x)
    if xs[0] == 0.0:
        raise ValueError("envelope constant undefined for the zero vector")
    N = xs.size
    norm = empirical_psi_norm(xs, a)
    weights = log_weight(np.arange(1, N + 1), N, a)
    return float(np.max(xs / (norm * weights)))


def dist_psi_norm(sample_or_law, alpha: float, p_max: int | None = None) -> float:
    """psi_alpha norm of a scalar law, or a moment-based estimate from data.

    Analytic law objects (anything with a ``psi_norm`` method) are evaluated
    exactly.  For a sample vector the estimate is::

        kappa * max{ ||x||_{L_p(emp)} / p**(1/alpha) : p even, 2 <= p <= p_max }

    with ``kappa`` = :data:`KAPPA_MOMENT`.  Moments beyond log(sample size)
    are too noisy to use, so ``p_max`` is capped there.

    Parameters
    ----------
    sample_or_law : array_like or law object
    alpha : float
    p_max : int, optional
        Largest even moment used; default is the largest even integer not
        exceeding max(2, log N).

    Returns
    -------
    float
    """
    a = check_alpha(alpha)
    if hasattr(sample_or_law, "psi_norm"):
        return float(sample_or_law.psi_norm(a))
    v = np.abs(np.asarray(sample_or_law, dtype=float).ravel())
    N = v.size
    if N < 1000:
        raise ValueError(f"moment estimation needs at least 1000 samples, got {N}")
    cap = max(2, int(math.log(N)))
    if p_max is None:
        p_max = cap - (cap % 2) if cap >= 2 else 2
    if p_max > cap:
        raise ValueError(f"p_max={p_max} exceeds the reliability cap {cap} = log(N)")
    if p_max < 2 or p_max % 2:
        raise ValueError(f"p_max must be an even integer >= 2, got {p_max}")
    best = 0.0
    for p in range(2, p_max + 1, 2):
        lp = float(np.mean(v**p)) ** (1.0 / p)
        best = max(best, lp / p ** (1.0 / a))
    return KAPPA_MOMENT * best


# ---------------------------------------------------------------------------
# Analytic scalar laws
# ---------------------------------------------------------------------------


def _solve_law_psi(mean_exp, scale_guess: float, lo_limit: float = 0.0,
                   rel_tol: float = 1e-12) -> float:
    """Bisection for inf{C : mean_exp(C) <= 2} given a decreasing mean_exp.

    ``lo_limit`` is an open lower barrier below which the mean is infinite
    (used for laws whose transform only converges above a critical scale).
    """
    hi = max(scale_guess, lo_limit * 2.0, 1e-300)
    for _ in range(400):
        if mean_exp(hi) <= 2.0:
            break
        hi *= 2.0
    else:
        return math.inf
    lo = max(0.5 * hi, lo_limit)
    for _ in range(400):
        if mean_exp(lo) > 2.0 or lo <= lo_limit * (1.0 + 1e-12):
            break
        hi = lo
        lo = max(0.5 * lo, lo_limit)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mean_exp(mid) > 2.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _quad_mean_exp(log_density_half, upper: float, C: float, alpha: float) -> float:
    """E exp((|X|/C)**alpha) for a symmetric law via one-sided quadrature.

    ``log_density_half`` is the log of the folded density on [0, upper]
    (``upper`` may be inf).  Overflow is clipped; a clipped integrand only
    occurs far above the root, where the bisection direction is unaffected.
    """

    def integrand(t: float) -> float:
        ld = log_density_half(t)
        if ld == -math.inf:
            return 0.0
        return math.exp(min((t / C) ** alpha + ld, _EXP_CLIP))

    import warnings

    with warnings.catch_warnings():
        # during bracket expansion the scale C may sit below the convergence
        # threshold; quad then warns about divergence, which is exactly the
        # "mean is huge, move up" signal the bisection wants
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-13,
                                epsrel=1e-13, limit=400)
    return val


@dataclass(frozen=True)
class GaussianLaw:
    """Centered gaussian scalar law with standard deviation ``sigma``."""

    sigma: float = 1.0

    def psi_norm(self, alpha: float) -> float:
        a = check_alpha(alpha)
        if a == 2.0:
            # E exp(X^2/C^2) = (1 - 2 sigma^2/C^2)^{-1/2} = 2  =>  C^2 = 8 sigma^2/3
            return self.sigma * math.sqrt(8.0 / 3.0)
        s = self.sigma

        def log_density_half(t: float) -> float:
            return math.log(2.0 / (s * math.sqrt(2.0 * math.pi))) - 0.5 * (t / s) ** 2

        def mean_exp(C: float) -> float:
            return _quad_mean_exp(log_density_half, math.inf, C, a)

        return _solve_law_psi(mean_exp, s)


@dataclass(frozen=True)
class LaplaceLaw:
    """Two-sided exponential law with scale ``b`` (density e^{-|x|/b}/(2b))."""

    b: float = 1.0

    def psi_norm(self, alpha: float) -> float:
        a = check_alpha(alpha)
        if a > 1.0:
            return math.inf  # tails are strictly heavier than exp(-t^alpha)
        # E e^{|X|/C} = 1/(1 - b/C) = 2  =>  C = 2b
        return 2.0 * self.b


@dataclass(frozen=True)
class SymmetricTwoPointLaw:
    """Uniform law on {-a, +a}."""

    a: float = 1.0

    def psi_norm(self, alpha: float) -> float:
        al = check_alpha(alpha)
        # exp((a/C)^alpha) = 2 exactly, both atoms contributing equally.
        return self.a / math.log(2.0) ** (1.0 / al)


@dataclass(frozen=True)
class ExpPowerLaw:
    """Symmetric law with density proportional to exp(-(|x|/scale)**alpha0)."""

    alpha0: float
    scale: float = 1.0

    def psi_norm(self, alpha: float) -> float:
        a = check_alpha(alpha)
        if a > self.alpha0:
            return math.inf
        if a == self.alpha0 == 1.0:
            return LaplaceLaw(self.scale).psi_norm(1.0)
        s = self.scale
        a0 = self.alpha0
        log_norm = math.log(1.0 / (s * math.gamma(1.0 + 1.0 / a0)))

        def log_density_half(t: float) -> float:
            return log_norm - (t / s) ** a0

        def mean_exp(C: float) -> float:
            return _quad_mean_exp(log_density_half, math.inf, C, a)

        # At alpha == alpha0 the transform diverges for C <= scale.
        barrier = s if a == a0 else 0.0
        return _solve_law_psi(mean_exp, 2.0 * s, lo_limit=barrier)


@dataclass(frozen=True)
class BallCoordinateLaw:
    """One coordinate of the isotropically scaled solid cross-polytope.

    A uniform point of the n-dimensional unit L1 ball, rescaled so every
    coordinate has unit variance, has coordinates distributed with folded
    density (n/s)(1 - u/s)^(n-1) on [0, s], where s = sqrt((n+1)(n+2)/2).
    """

    n: int

    @property
    def support(self) -> float:
        return math.sqrt((self.n + 1) * (self.n + 2) / 2.0)

    def psi_norm(self, alpha: float) -> float:
        a = check_alpha(alpha)
        n, s = self.n, self.support
        if n == 1:
            # coordinate is uniform on [-s, s]
            log_n_over_s = math.log(1.0 / s)

            def log_density_half(t: float) -> float:
                return log_n_over_s if t <= s else -math.inf
        else:
            log_n_over_s = math.log(n / s)

            def log_density_half(t: float) -> float:
                if t >= s:
                    return -math.inf
                return log_n_over_s + (n - 1) * math.log1p(-t / s)

        def mean_exp(C: float) -> float:
            return _quad_mean_exp(log_density_half, s, C, a)

        return _solve_law_psi(mean_exp, 1.0)
