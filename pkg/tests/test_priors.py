import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structagg.core import SparsityPattern
from structagg.groups import GroupStructure
from structagg.priors import (PriorSpec, check_assumption_grouped, check_assumption_penalized,
                              complexity, log_prior_ratio, log_prior_unnormalized,
                              spa_log_ratio_closed_form, strong_hierarchy_violations)
from structagg.structure import DistanceSpec, PenaltySpec

CHAIN3 = GroupStructure([[0, 1], [1, 2], [2, 3]])


def sup(s, M):
    return SparsityPattern.from_support([i - 1 for i in s], M)


def test_complexity_examples():
    assert complexity(sup([1, 2, 3], 10), PriorSpec.spa(10)) == 3
    ssa = PriorSpec.ssa(PenaltySpec.clusters(DistanceSpec.line(10), 3))
    assert complexity(sup([1, 2, 3, 8, 9], 10), ssa) == 7
    assert complexity(SparsityPattern.full(4), PriorSpec.gsa(CHAIN3)) == 2


def test_log_prior_examples():
    spa = PriorSpec.spa(10)
    assert log_prior_unnormalized(SparsityPattern.empty(10), spa) == 0.0
    assert log_prior_unnormalized(sup([1, 2], 10), spa) == pytest.approx(-6.60517, abs=1e-5)
    assert log_prior_unnormalized(sup([1, 2], 10), spa) == \
        pytest.approx(2 * (math.log(2) - math.log(20) - 1), abs=1e-12)
    capped = PriorSpec.spa(10, R=4)
    assert log_prior_unnormalized(sup([1, 2, 3, 4, 5], 10), capped) == -math.inf


def test_full_model_half_mass():
    spec = PriorSpec.spa(5, R=3, simplified=False)
    assert log_prior_unnormalized(SparsityPattern.full(5), spec) == pytest.approx(math.log(0.5))
    assert log_prior_unnormalized(SparsityPattern.full(5), PriorSpec.spa(5, R=3)) == -math.inf
    assert log_prior_unnormalized(sup([1], 5), spec) == \
        log_prior_unnormalized(sup([1], 5), PriorSpec.spa(5, R=3))


def test_ratio_examples():
    spa = PriorSpec.spa(10)
    p = sup([3], 10)
    assert log_prior_ratio(p, p, spa) == 0
    q = sup([3, 7], 10)
    assert log_prior_ratio(q, p, spa) == pytest.approx(math.log(4 / (20 * math.e)), abs=1e-12)
    assert spa_log_ratio_closed_form(2, 1, 10) == pytest.approx(-2.60944, abs=1e-5)
    gsa = PriorSpec.gsa(CHAIN3)
    assert log_prior_ratio(sup([1, 3], 4), sup([1, 2], 4), gsa) == -math.inf


def test_strong_hierarchy_prior():
    dag = PenaltySpec.dag(3, [(0, 1), (1, 2)], strong_hierarchy=True)
    spec = PriorSpec.ssa(dag)
    assert spec.strong_hierarchy
    assert log_prior_unnormalized(sup([3], 3), spec) == -math.inf
    assert math.isfinite(log_prior_unnormalized(sup([1, 2, 3], 3), spec))
    assert strong_hierarchy_violations(sup([1, 3], 3), dag) == [2]


def test_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec("bogus", 3, 3)
    with pytest.raises(ValueError):
        PriorSpec("ssa", 3, 3)
    with pytest.raises(ValueError):
        PriorSpec.spa(3, R=0)
    assert PriorSpec.gsa(CHAIN3).C == 3


@settings(max_examples=100, deadline=None)
@given(M=st.integers(1, 30), data=st.data())
def test_spa_closed_form_identity(M, data):
    kp = data.draw(st.integers(1, M))
    kq = data.draw(st.integers(0, M))
    spec = PriorSpec.spa(M)
    p = SparsityPattern.from_support(range(kp), M)
    q = SparsityPattern.from_support(range(kq), M)
    assert spa_log_ratio_closed_form(kq, kp, M) == \
        pytest.approx(log_prior_ratio(q, p, spec), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_ratio_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    M = 8
    specs = [PriorSpec.ssa(PenaltySpec.clusters(DistanceSpec.line(M), 2)),
             PriorSpec.ssa(PenaltySpec.cut(DistanceSpec.line(M))),
             PriorSpec.gsa(GroupStructure([[i, i + 1] for i in range(M - 1)]))]
    for spec in specs:
        p = SparsityPattern(rng.random(M) < 0.5)
        q = SparsityPattern(rng.random(M) < 0.5)
        if log_prior_unnormalized(p, spec) == log_prior_unnormalized(q, spec) == -math.inf:
            continue
        a, b = log_prior_ratio(q, p, spec), log_prior_ratio(p, q, spec)
        if math.isfinite(a):
            assert a == pytest.approx(-b, abs=1e-10)
        else:
            assert a == -b


def test_assumption_clusters_and_weights_pass():
    M = 8
    for pen in (PenaltySpec.clusters(DistanceSpec.line(M), 3),
                PenaltySpec.weights(np.full(M, 0.5))):
        rep = check_assumption_penalized(PriorSpec.ssa(pen))
        assert rep.passed and rep.sufficient_condition
        assert rep.checked == 2 ** M - 2


def test_assumption_oversized_cut_listed():
    M = 8
    pen = PenaltySpec.cut(DistanceSpec(positions=10.0 * np.arange(M)[:, None]))
    rep = check_assumption_penalized(PriorSpec.ssa(pen))
    assert not rep.passed and not rep.sufficient_condition
    # each listed pattern really has ||p||_c > M
    for support, reason in rep.violators:
        assert reason == "penalty_bound"
        assert pen(SparsityPattern.from_support(support, M)) > M
    assert "violated" in rep.summary()


def test_grouped_assumption_singletons():
    rep = check_assumption_grouped(PriorSpec.gsa(GroupStructure([[i] for i in range(6)])))
    assert rep.passed and rep.sufficient_condition


def test_grouped_assumption_large_groups():
    G = GroupStructure([list(range(5 * k, 5 * k + 5)) for k in range(10)])
    rep = check_assumption_grouped(PriorSpec.gsa(G, R=10), exhaustive_limit=0)
    assert rep.detail["threshold"] == pytest.approx(math.log1p(math.e))
    assert not rep.sufficient_condition
    assert "not guaranteed" in rep.summary()


def test_grouped_assumption_exhaustive_six_groups():
    G = GroupStructure([[0, 1, 2, 3], [4], [5], [6, 7], [7, 8], [9]])
    spec = PriorSpec.gsa(G, R=10)
    rep = check_assumption_grouped(spec)
    assert rep.detail["exhaustive"]
    # direct evaluation on every union of groups
    expect = []
    for key in range(1, 64):
        bits = G.masks[[k for k in range(6) if key >> k & 1]].any(axis=0)
        p = SparsityPattern(bits)
        if not 0 < p.count < 10:
            continue
        k = complexity(p, spec)
        if p.count / k > math.log(1 + math.e * 6 / max(k, 1)):
            expect.append(sorted(p.support.tolist()))
    got = sorted(sorted(s) for s, _ in rep.violators)
    assert got == sorted({tuple(e): e for e in expect}.values())
    assert got  # the block of four is too large for one group
