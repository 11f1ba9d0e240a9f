import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structagg.aggregate import (ChainConfig, aggregate, estimate_sigma2, exact_aggregate,
                                 log_acceptance, metropolis_run, two_stage_sigma2)
from structagg.core import Dataset, SparsityPattern, normalize_columns, restricted_ols
from structagg.groups import GroupStructure
from structagg.priors import PriorSpec, log_prior_unnormalized
from structagg.structure import DistanceSpec, PenaltySpec

from oracles import ols_pinv, spa_aggregate_bruteforce


def make_data(seed, n, M, k=2, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, M))
    beta = np.zeros(M)
    beta[:k] = 1.0
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(y, X)


def test_single_orthogonal_covariate():
    x = np.array([1.0, -1.0, 1.0, -1.0])
    y = np.array([1.0, 1.0, 1.0, 1.0])
    fit = exact_aggregate(Dataset(y, x[:, None]), PriorSpec.spa(1), 1.0)
    assert fit.beta == pytest.approx([0.0], abs=1e-15)
    # weights: empty model 1, singleton (1/(2e))^1 e^{-1/2}
    w1 = math.exp(math.log(1 / (2 * math.e)) - 0.5)
    assert fit.selection_freq[0] == pytest.approx(w1 / (1 + w1), abs=1e-12)


def test_exact_matches_literal_formula():
    data = make_data(0, 12, 3)
    beta, incl = spa_aggregate_bruteforce(data.X, data.y, 0.7)
    fit = exact_aggregate(data, PriorSpec.spa(3), 0.7)
    assert np.allclose(fit.beta, beta, atol=1e-10, rtol=0)
    assert np.allclose(fit.selection_freq, incl, atol=1e-10, rtol=0)
    assert fit.visited == 8
    assert math.fsum(math.exp(v) for v in fit.log_weights.values()) == pytest.approx(1.0)


def test_exact_respects_rank_cap():
    data = make_data(1, 12, 4)
    beta, _ = spa_aggregate_bruteforce(data.X, data.y, 0.5, R=2)
    fit = exact_aggregate(data, PriorSpec.spa(4, R=2), 0.5)
    assert np.allclose(fit.beta, beta, atol=1e-10)
    assert fit.visited == 1 + 4 + 6


def test_huge_sigma2_gives_prior_average():
    data = make_data(2, 10, 3)
    spec = PriorSpec.spa(3)
    fit = exact_aggregate(data, spec, 1e12)
    w, bs = [], []
    for key in range(8):
        p = SparsityPattern.from_int(key, 3)
        w.append(math.exp(log_prior_unnormalized(p, spec) - p.count / 2))
        bs.append(ols_pinv(data.X, data.y, p.support)[0])
    expect = np.average(bs, axis=0, weights=w)
    assert np.allclose(fit.beta, expect, atol=1e-8)


def test_exact_is_permutation_equivariant():
    data = make_data(3, 15, 5)
    perm = np.array([3, 0, 4, 1, 2])
    a = exact_aggregate(data, PriorSpec.spa(5), 0.4)
    b = exact_aggregate(Dataset(data.y, data.X[:, perm]), PriorSpec.spa(5), 0.4)
    assert np.allclose(a.selection_freq[perm], b.selection_freq, atol=1e-12)
    assert np.allclose(a.beta[perm], b.beta, atol=1e-10)


def test_exact_group_walk_matches_covariate_walk():
    data = make_data(4, 20, 6)
    G = GroupStructure([[0, 1], [1, 2], [3, 4, 5], [5]])
    spec = PriorSpec.gsa(G)
    a = exact_aggregate(data, spec, 0.3, walk="covariate")
    b = exact_aggregate(data, spec, 0.3, walk="group")
    assert a.visited == b.visited
    assert np.allclose(a.beta, b.beta, atol=1e-10)


def test_exact_errors():
    data = make_data(5, 10, 3)
    with pytest.raises(ValueError):
        exact_aggregate(data, PriorSpec.spa(3), 0.0)
    with pytest.raises(ValueError):
        exact_aggregate(data, PriorSpec.spa(3), 1.0, limit=2)
    with pytest.raises(ValueError):
        exact_aggregate(data, PriorSpec.spa(4), 1.0)


def test_chain_final_window_is_final_state():
    data, _ = normalize_columns(make_data(6, 30, 6))
    cfg = ChainConfig(PriorSpec.spa(6), sigma2=0.1, iterations=300, burn_in=299, seed=3)
    fit = metropolis_run(data, cfg)
    final = SparsityPattern.from_support(fit.metadata["final_support"], 6)
    assert np.allclose(fit.beta, restricted_ols(data, final).beta, atol=1e-10)
    assert fit.visited == 1


def test_chain_is_deterministic():
    data, _ = normalize_columns(make_data(7, 30, 8))
    cfg = ChainConfig(PriorSpec.spa(8), sigma2=0.05, iterations=800, burn_in=200, seed=11)
    a, b = metropolis_run(data, cfg), metropolis_run(data, cfg)
    assert np.array_equal(a.beta, b.beta)
    assert np.array_equal(a.selection_freq, b.selection_freq)
    assert a.pattern_counts == b.pattern_counts and a.metadata == b.metadata
    c = metropolis_run(data, cfg.replace(seed=12))
    assert not np.array_equal(a.beta, c.beta)


def test_chain_never_exceeds_rank_cap():
    data, _ = normalize_columns(make_data(8, 30, 8, k=6))
    cfg = ChainConfig(PriorSpec.spa(8, R=3), sigma2=0.01, iterations=2000, burn_in=0, seed=1)
    fit = metropolis_run(data, cfg)
    assert max(SparsityPattern.from_int(k, 8).count for k in fit.pattern_counts) <= 3


def test_chain_strong_hierarchy():
    data, _ = normalize_columns(make_data(9, 40, 6, k=3))
    dag = PenaltySpec.dag(6, [(0, 1), (1, 2), (0, 3), (4, 5)], strong_hierarchy=True)
    cfg = ChainConfig(PriorSpec.ssa(dag), sigma2=0.05, iterations=3000, burn_in=0, seed=2)
    fit = metropolis_run(data, cfg)
    for key in fit.pattern_counts:
        assert dag.respects_hierarchy(SparsityPattern.from_int(key, 6))
    assert len(fit.pattern_counts) > 1


def test_chain_error_floor():
    data, _ = normalize_columns(make_data(10, 25, 6))
    full = restricted_ols(data, SparsityPattern.full(6)).error
    fit = metropolis_run(data, ChainConfig(PriorSpec.spa(6), sigma2=0.2, iterations=1000,
                                           burn_in=100, seed=0))
    assert fit.mean_error >= full - 1e-9


def test_group_walk_records_cover_choice():
    data, _ = normalize_columns(make_data(11, 30, 6))
    G = GroupStructure([[0, 1], [1, 2], [2, 3], [4, 5]])
    cfg = ChainConfig(PriorSpec.gsa(G), sigma2=0.1, iterations=500, burn_in=100, seed=0,
                      walk="group")
    fit = metropolis_run(data, cfg)
    counts = fit.metadata["gsa_complexity"]
    assert counts["exact_cover"] > 0 and counts["selected_group_count"] == 0
    with pytest.raises(ValueError):
        ChainConfig(PriorSpec.spa(6), walk="group")


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(PriorSpec.spa(3), iterations=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(PriorSpec.spa(3), walk="sideways")
    with pytest.raises(ValueError):
        metropolis_run(make_data(0, 5, 3), ChainConfig(PriorSpec.spa(3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), sigma2=st.floats(0.01, 10.0))
def test_detailed_balance(seed, sigma2):
    rng = np.random.default_rng(seed)
    M = 6
    data = Dataset(rng.standard_normal(12), rng.standard_normal((12, M)))
    priors = [PriorSpec.spa(M, R=4),
              PriorSpec.ssa(PenaltySpec.clusters(DistanceSpec.line(M), 2)),
              PriorSpec.gsa(GroupStructure([[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]]))]
    for prior in priors:
        p = SparsityPattern(rng.random(M) < 0.5)
        q = p.flip(int(rng.integers(M)))
        lp, lq = log_prior_unnormalized(p, prior), log_prior_unnormalized(q, prior)
        if lp == -math.inf or lq == -math.inf:
            continue
        fp, fq = restricted_ols(data, p), restricted_ols(data, q)
        wp = -fp.error / (4 * sigma2) - p.count / 2 + lp
        wq = -fq.error / (4 * sigma2) - q.count / 2 + lq
        forward = log_acceptance(fp, fq, prior, sigma2)
        backward = log_acceptance(fq, fp, prior, sigma2)
        assert forward - backward == pytest.approx(wq - wp, abs=1e-10 * max(1, abs(wq - wp)))


def test_sigma2_noiseless():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((40, 5))
    y = X @ np.array([1.0, -1.0, 0, 0, 0])
    data, scaling = normalize_columns(Dataset(y, X))
    cfg = ChainConfig(PriorSpec.spa(5), iterations=1500, burn_in=500, seed=0)
    est = estimate_sigma2(data, cfg, alpha=1e-3, grid=[1e-2, 1e-4, 1e-6], scaling=scaling)
    assert est.sigma2 <= 1e-2 and not est.fallback
    assert est.path[-1][1] < 1e-3


def test_sigma2_pure_noise():
    rng = np.random.default_rng(13)
    data, scaling = normalize_columns(Dataset(rng.standard_normal(200),
                                              rng.standard_normal((200, 10))))
    cfg = ChainConfig(PriorSpec.spa(10), iterations=2000, burn_in=500, seed=1)
    est = two_stage_sigma2(data, cfg, scaling=scaling)
    assert 0.7 <= est.sigma2 <= 1.3
    grid = estimate_sigma2(data, cfg, alpha=0.1, grid=np.linspace(2.0, 0.5, 16), scaling=scaling)
    assert 0.7 <= grid.sigma2 <= 1.3 and not grid.fallback


def test_sigma2_fallback_flag():
    rng = np.random.default_rng(14)
    data = Dataset(rng.standard_normal(100), rng.standard_normal((100, 4)))
    cfg = ChainConfig(PriorSpec.spa(4), iterations=500, burn_in=100, seed=0)
    est = estimate_sigma2(data, cfg, alpha=0.01, grid=[50.0, 30.0, 20.0])
    assert est.fallback and est.sigma2 == 20.0
    with pytest.raises(ValueError):
        estimate_sigma2(data, cfg, alpha=0.0, grid=[1.0])


def test_aggregate_reports_original_units():
    rng = np.random.default_rng(15)
    X = rng.standard_normal((60, 4)) * np.array([1.0, 10.0, 0.1, 3.0])
    y = X @ np.array([0.5, 0.2, 0.0, 0.0]) + 0.1 * rng.standard_normal(60)
    fit = aggregate(Dataset(y, X), PriorSpec.spa(4), sigma2=0.01, exact=True)
    assert fit.beta[:2] == pytest.approx([0.5, 0.2], abs=0.05)
    chain = aggregate(Dataset(y, X), PriorSpec.spa(4), sigma2=0.01, iterations=3000,
                      burn_in=500, seed=0)
    assert np.allclose(chain.beta, fit.beta, atol=0.05)
    auto = aggregate(Dataset(y, X), PriorSpec.spa(4), iterations=2000, burn_in=500)
    # two stages: pilot at var(y), rerun at the pilot's residual variance
    (d0, s0), (d1, s1) = auto.metadata["sigma2_path"]
    assert d0 == pytest.approx(np.var(y, ddof=1))
    assert auto.sigma2 == d1 == s0
    assert 0.003 < s1 < 0.03


def test_thresholded_readout():
    data, _ = normalize_columns(make_data(16, 50, 6, k=2, noise=0.1))
    fit = metropolis_run(data, ChainConfig(PriorSpec.spa(6), sigma2=0.01, iterations=1000,
                                           burn_in=200, seed=0))
    sparse = fit.thresholded(0.5)
    assert np.all(sparse[fit.selection_freq < 0.5] == 0)
    assert np.array_equal(fit.thresholded(0.0), fit.beta)
