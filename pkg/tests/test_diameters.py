import itertools
import math

import numpy as np
import pytest

from psidiam.complexity import ComplexityEstimate, IndexClass
from psidiam.diameters import (
    _sphere_greedy_profile,
    crossover_m0,
    diameter_profile,
    dyadic_ms,
    empirical_Dm,
    gaussian_lower_check,
    lp_diameter,
    moment_equivalence_check,
    optimality_experiment,
    paley_zygmund,
    subadditivity_union_Dm,
    theoretical_Dm_bound,
)
from psidiam.ensembles import EnsembleSpec, sample


def make_est(width=1.0, d_psi=1.0, alpha=1.0):
    return ComplexityEstimate(
        width=width, width_se=0.0, gamma2_upper=2 * width,
        gamma2_lower_proxy=width / 2, d_psi_alpha=d_psi, d_L2=1.0, alpha=alpha,
    )


def test_full_m_matches_eigensolver():
    X = sample(EnsembleSpec("gaussian", 5), 20, 3)
    got = empirical_Dm(X, IndexClass.sphere(5), 20)
    lam = np.linalg.eigvalsh(X.matrix.T @ X.matrix)[-1]
    assert got.method == "exact-svd-enum"
    assert abs(got.value - math.sqrt(lam)) < 1e-8


def test_single_vector_class_is_topm_sum():
    X = sample(EnsembleSpec("gaussian", 3), 12, 4)
    x = np.array([0.2, -1.0, 0.4])
    got = empirical_Dm(X, IndexClass.finite([x]), 5)
    v = np.sort((X.matrix @ x) ** 2)[::-1]
    assert got.method == "exact-topm"
    assert abs(got.value - math.sqrt(v[:5].sum())) < 1e-12


def test_vector_class_monotone_in_m():
    X = sample(EnsembleSpec("exp_power", 4, alpha=1.0), 16, 5)
    cls = IndexClass.l1_vertices(4)
    vals = [empirical_Dm(X, cls, m).value for m in range(1, 17)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_pair_enumeration_matches_brute_svd():
    X = sample(EnsembleSpec("gaussian", 3), 8, 6)
    got = empirical_Dm(X, IndexClass.sphere(3), 2).value
    brute = max(
        np.linalg.svd(X.matrix[list(idx)], compute_uv=False)[0]
        for idx in itertools.combinations(range(8), 2)
    )
    assert abs(got - brute) < 1e-10


def test_greedy_close_to_exact_small_case():
    worst = 1.0
    for t in range(100):
        sm = sample(EnsembleSpec("gaussian", 2), 6, 1000 + t)
        exact = empirical_Dm(sm, IndexClass.sphere(2), 2).value
        prof = _sphere_greedy_profile(sm.matrix, [2], restarts=8, seed=t)
        worst = min(worst, prof[2] / exact)
    assert worst >= 0.95


def test_greedy_tag_on_large_combinations():
    sm = sample(EnsembleSpec("gaussian", 6), 64, 7)
    got = empirical_Dm(sm, IndexClass.sphere(6), 8)
    assert got.method == "greedy-lower"
    exact_full = empirical_Dm(sm, IndexClass.sphere(6), 64).value
    assert got.value <= exact_full + 1e-9


def test_dm_domain_errors():
    X = sample(EnsembleSpec("gaussian", 2), 4, 8)
    with pytest.raises(ValueError):
        empirical_Dm(X, IndexClass.sphere(2), 5)
    with pytest.raises(ValueError):
        empirical_Dm(X, IndexClass.sphere(2), 0)


def test_bound_terms_and_limits():
    est = make_est(width=100.0, d_psi=1.0, alpha=1.0)
    b = theoretical_Dm_bound(est, 1.0, 1, 64)
    assert b.bound_max == b.gamma2_term == 100.0  # gamma2-dominant at m=1
    est2 = make_est(width=1.0, d_psi=3.0)
    b2 = theoretical_Dm_bound(est2, 1.0, 64, 64)
    assert abs(b2.tail_term - 3.0 * math.sqrt(64)) < 1e-12  # log(eN/N) = 1
    with pytest.raises(ValueError):
        theoretical_Dm_bound(est, 1.0, 1, 64, u=0.5)


def test_bound_independent_recomputation():
    est = make_est(width=2.5, d_psi=1.7, alpha=1.5)
    for m, N, u in [(3, 32, 1.0), (8, 64, 2.0), (64, 64, 1.5)]:
        b = theoretical_Dm_bound(est, 1.5, m, N, u)
        tail = u * 1.7 * m**0.5 * math.log(math.e * N / m) ** (1 / 1.5)
        assert abs(b.gamma2_term - u * 2.5) < 1e-12
        assert abs(b.tail_term - tail) < 1e-12
        assert abs(b.bound_sum - (b.gamma2_term + b.tail_term)) < 1e-12


def test_profile_grid_and_monotonicity():
    sm = sample(EnsembleSpec("gaussian", 8), 64, 9)
    prof = diameter_profile(sm, IndexClass.sphere(8), 2.0, est=make_est(3.0, 1.6, 2.0))
    assert prof.ms == tuple(dyadic_ms(64)) == (1, 2, 4, 8, 16, 32, 64)
    assert all(b >= a for a, b in zip(prof.values, prof.values[1:]))
    assert all(r > 0 for r in prof.ratios)
    assert prof.methods[0] == "exact-svd-enum"


def test_lp_reduces_to_dm_at_p2():
    X = sample(EnsembleSpec("gaussian", 4), 32, 10)
    cls = IndexClass.finite(np.eye(4)[:2])
    est = make_est(2.0, 1.5)
    lp = lp_diameter(X, cls, 4, 2.0, alpha=1.0, est=est)
    dm = empirical_Dm(X, cls, 4)
    assert abs(lp.value - dm.value) < 1e-12


def test_lp_p1_single_vector():
    X = sample(EnsembleSpec("gaussian", 3), 10, 11)
    x = np.array([1.0, 0.5, -0.25])
    lp = lp_diameter(X, IndexClass.finite([x]), 4, 1.0, est=make_est())
    v = np.sort(np.abs(X.matrix @ x))[::-1]
    assert abs(lp.value - v[:4].sum()) < 1e-12


def test_lp_regimes_meet_at_crossover():
    est = make_est(width=7.2, d_psi=1.2, alpha=1.0)
    N = 64
    m0 = crossover_m0(est.width, est.d_psi_alpha, N, 1.0)
    assert 1 < m0 < N
    logw = math.log(math.e * N / m0)
    for p in (1.0, 1.5, 2.0, 3.0, 4.0):
        small = est.width * m0 ** (1 / p - 0.5) + est.d_psi_alpha * m0 ** (1 / p) * logw
        large = est.width + est.d_psi_alpha * m0 ** (1 / p) * logw
        assert max(small, large) / min(small, large) <= 2.0


def test_lp_errors():
    X = sample(EnsembleSpec("gaussian", 2), 8, 12)
    with pytest.raises(ValueError):
        lp_diameter(X, IndexClass.finite(np.eye(2)), 2, 2.5, est=make_est())
    with pytest.raises(ValueError):
        lp_diameter(X, IndexClass.sphere(2), 2, 2.0, est=make_est())


def test_gaussian_lower_single_sample_reduces_to_vector_norm():
    r = gaussian_lower_check(IndexClass.sphere(8), 1, 1, trials=200, seed=0)
    e_norm = math.sqrt(2.0) * math.gamma(4.5) / math.gamma(4.0)
    assert abs(r.lhs - e_norm) <= 0.1
    assert 0.4 <= r.ratio <= 1.0


def test_gaussian_lower_band_on_sphere_grid():
    # band frozen from the first calibration run: c ~ 0.7 throughout
    for m in (1, 4, 16, 32):
        r = gaussian_lower_check(IndexClass.sphere(8), 64, m, trials=15, seed=m)
        assert 0.1 <= r.ratio <= 1.0


def test_gaussian_lower_singleton_stable_in_N():
    x0 = np.array([0.6, -0.8])
    ratios = [
        gaussian_lower_check(IndexClass.finite([x0]), N, 4, trials=30, seed=1).ratio
        for N in (16, 64, 256)
    ]
    assert max(ratios) / min(ratios) <= 1.5


def test_optimality_small_case_matches_direct_simulation():
    res = optimality_experiment(4, 1, 1.0, trials=5, seed=21)
    weights = 1.0 / np.sqrt(np.log(np.arange(2, 6)))
    spec = EnsembleSpec("exp_power", 4, alpha=1.0, normalize_isotropic=False)
    for t, ts in enumerate(res.trial_seeds):
        sm = sample(spec, 1, ts)
        brute = float(np.max(np.abs(sm.matrix.sum(axis=0)) * weights))
        assert abs(res.sups[t] - brute) < 1e-12


def test_optimality_control_arm_bounded():
    ctrl = optimality_experiment(128, 128, 1.0, trials=40, seed=22)
    assert float(np.mean(ctrl.r_values)) <= 2.0


def test_optimality_validation():
    with pytest.raises(ValueError):
        optimality_experiment(16, 2, 2.0)
    with pytest.raises(ValueError):
        optimality_experiment(2**21, 2, 1.0)


def test_paley_zygmund_examples():
    assert paley_zygmund(1.0, 1.0, 1, 2, 0.5) == 0.25
    assert paley_zygmund(1.0, 1.0, 1, 2, 0.999) < 1e-5
    with pytest.raises(ValueError):
        paley_zygmund(1.0, 1.0, 2, 2, 0.5)
    with pytest.raises(ValueError):
        paley_zygmund(1.0, 1.0, 1, 2, 1.0)
    with pytest.raises(ValueError):
        paley_zygmund(2.0, 1.0, 1, 2, 0.5)


def test_paley_zygmund_holds_for_laplace_sums():
    rng = np.random.default_rng(99)
    lam = 0.5
    for _ in range(100):
        n = int(rng.integers(2, 17))
        x = np.sort(rng.uniform(0.1, 1.0, n))[::-1]
        z = rng.laplace(size=(4000, n)) @ x
        l2 = float(np.mean(z**2) ** 0.5)
        l4 = float(np.mean(z**4) ** 0.25)
        bound = paley_zygmund(l2, l4, 2, 4, lam)
        tail = float(np.mean(np.abs(z) >= lam * l2))
        assert tail >= bound


def test_moment_single_weight_anchor():
    t = moment_equivalence_check(np.array([1.0]), 1.0, p_grid=(2,),
                                 trials=50000, seed=3)
    # raw unit Laplace has L2 norm sqrt 2; the p-term of the formula is 2
    assert abs(t.mc_norms[0] - math.sqrt(2.0)) <= 0.03
    assert abs(t.ratios[0] - math.sqrt(2.0) / 2.0) <= 0.03


def test_moment_uniform_band():
    x = np.ones(64) / 8.0
    t = moment_equivalence_check(x, 1.0, p_grid=(2, 4, 8), trials=20000, seed=4)
    assert max(t.ratios) / min(t.ratios) <= 4.0


def test_moment_alpha2_stable():
    x = np.ones(64) / 8.0
    t = moment_equivalence_check(x, 2.0, p_grid=(2, 4, 8), trials=20000, seed=5)
    assert max(t.ratios) / min(t.ratios) <= 2.0


def test_moment_validation():
    with pytest.raises(ValueError):
        moment_equivalence_check([1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        moment_equivalence_check([1.0], 1.0, p_grid=(3,))
    with pytest.raises(ValueError):
        moment_equivalence_check([1.0], 1.0, p_grid=(18,))


def test_union_subadditivity_exact():
    X = sample(EnsembleSpec("gaussian", 3), 12, 13)
    a = IndexClass.finite(np.eye(3)[:1])
    b = IndexClass.finite([[0.0, 0.7, -0.7]])
    du, da, db = subadditivity_union_Dm(X, a, b, 3)
    assert du == max(da, db)
