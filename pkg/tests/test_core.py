import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structagg.core import (Dataset, SparsityPattern, normalize_columns, ols_update,
                            restricted_ols)

from oracles import ols_pinv


def test_dataset_rejects_bad_input():
    with pytest.raises(ValueError):
        Dataset(np.zeros(3), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        Dataset(np.array([1.0, np.nan]), np.ones((2, 1)))
    with pytest.raises(ValueError):
        Dataset(np.zeros(2), np.ones((2, 1)), sigma2=0.0)


def test_dataset_arrays_are_read_only():
    d = Dataset(np.zeros(3), np.ones((3, 2)))
    with pytest.raises(ValueError):
        d.X[0, 0] = 5.0


def test_normalize_scales_long_columns_only():
    X = np.zeros((4, 3))
    X[:, 0] = [2.0, 0, 0, 0]
    X[:, 1] = [0.5, 0, 0, 0]
    X[:, 2] = [0, 0, 3.0, 4.0]
    scaled, scaling = normalize_columns(Dataset(np.ones(4), X))
    norms = np.linalg.norm(scaled.X, axis=0)
    assert norms == pytest.approx([1.0, 0.5, 1.0])
    assert scaling.scales == pytest.approx([2.0, 1.0, 5.0])


def test_normalize_leaves_identity_alone():
    scaled, _ = normalize_columns(Dataset(np.ones(3), np.eye(3)))
    assert np.array_equal(scaled.X, np.eye(3))


def test_scaling_round_trip():
    rng = np.random.default_rng(0)
    X = 3 * rng.standard_normal((10, 4))
    scaled, scaling = normalize_columns(Dataset(rng.standard_normal(10), X))
    b = rng.standard_normal(4)
    assert np.allclose(X @ scaling.to_original(b), scaled.X @ b)
    assert np.allclose(scaling.to_normalized(scaling.to_original(b)), b)


def test_pattern_basics():
    p = SparsityPattern.from_support([0, 2], 4)
    assert p.count == 2 and p.M == 4
    assert p.to_int() == 5
    assert SparsityPattern.from_int(5, 4) == p
    assert p.flip(1).support.tolist() == [0, 1, 2]
    assert p.complement().support.tolist() == [1, 3]
    assert p.issubset(SparsityPattern.full(4))
    assert not SparsityPattern.full(4).issubset(p)
    assert len({p, SparsityPattern.from_int(5, 4)}) == 1


def test_empty_pattern_fit():
    y = np.array([1.0, 2.0, 2.0])
    fit = restricted_ols(Dataset(y, np.ones((3, 2))), SparsityPattern.empty(2))
    assert np.all(fit.beta == 0)
    assert fit.error == pytest.approx(9.0)


def test_small_system_normal_equations():
    X = np.array([[1.0, 0], [0, 1], [0, 0]])
    y = np.array([2.0, 3, 5])
    fit = restricted_ols(Dataset(y, X), SparsityPattern.full(2))
    # X.T X = I and X.T y = (2, 3) give beta = (2, 3); only the third entry is left
    assert fit.beta == pytest.approx([2.0, 3.0])
    assert fit.error == pytest.approx(25.0)


def test_duplicated_column_min_norm():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(8)
    y = rng.standard_normal(8)
    X = np.column_stack([x, x])
    fit = restricted_ols(Dataset(y, X), SparsityPattern.full(2))
    ref, _ = ols_pinv(X, y, [0, 1])
    single = restricted_ols(Dataset(y, X), SparsityPattern.from_support([0], 2))
    assert fit.beta == pytest.approx(ref, abs=1e-12)
    assert fit.beta[0] == pytest.approx(fit.beta[1])
    assert fit.error == pytest.approx(single.error)
    assert fit.rank == 1


def test_update_orthogonal_column_keeps_error():
    X = np.array([[1.0, 0], [0, 1], [0, 0]])
    y = np.array([2.0, 0, 5])
    data = Dataset(y, X)
    fit = restricted_ols(data, SparsityPattern.from_support([0], 2))
    resid = y - X @ fit.beta
    assert X[:, 1] @ resid == 0
    new = ols_update(fit, 1, data)
    assert new.error == pytest.approx(fit.error)
    assert new.beta[1] == pytest.approx(0.0)


def test_update_remove_only_column():
    rng = np.random.default_rng(2)
    data = Dataset(rng.standard_normal(6), rng.standard_normal((6, 3)))
    fit = restricted_ols(data, SparsityPattern.from_support([1], 3))
    empty = ols_update(fit, 1, data)
    assert empty.pattern.count == 0
    assert np.all(empty.beta == 0)
    assert empty.error == pytest.approx(float(data.y @ data.y))


def test_update_each_bit_in_sequence():
    rng = np.random.default_rng(3)
    data = Dataset(rng.standard_normal(20), rng.standard_normal((20, 8)))
    fit = restricted_ols(data, SparsityPattern.empty(8))
    for i in list(range(8)) + list(range(8)):
        fit = ols_update(fit, i, data)
        ref = restricted_ols(data, fit.pattern)
        assert np.allclose(fit.beta, ref.beta, rtol=1e-10, atol=1e-12)
        assert fit.error == pytest.approx(ref.error, rel=1e-10)


def test_update_through_collinear_column():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 3))
    X[:, 2] = X[:, 0] - X[:, 1]
    data = Dataset(rng.standard_normal(10), X)
    fit = restricted_ols(data, SparsityPattern.empty(3))
    for i in (0, 1, 2, 0, 2, 1):
        fit = ols_update(fit, i, data)
        ref, err = ols_pinv(X, data.y, fit.pattern.support)
        assert fit.error == pytest.approx(err, rel=1e-9, abs=1e-12)
        assert np.allclose(fit.beta, ref, atol=1e-8)


def test_periodic_refactor_resets_counter():
    rng = np.random.default_rng(5)
    data = Dataset(rng.standard_normal(12), rng.standard_normal((12, 4)))
    fit = restricted_ols(data, SparsityPattern.empty(4))
    for t in range(7):
        fit = ols_update(fit, t % 4, data, refactor_every=3)
        assert fit.updates < 3


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(3, 15), M=st.integers(1, 8),
       flips=st.lists(st.integers(0, 7), min_size=1, max_size=30))
def test_update_matches_pseudoinverse(seed, n, M, flips):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, M))
    data = Dataset(rng.standard_normal(n), X)
    fit = restricted_ols(data, SparsityPattern.empty(M))
    for i in flips:
        fit = ols_update(fit, i % M, data)
        ref, err = ols_pinv(X, data.y, fit.pattern.support)
        assert fit.error == pytest.approx(err, rel=1e-8, abs=1e-10)
        assert np.allclose(fit.beta, ref, rtol=1e-7, atol=1e-8)
        assert set(np.flatnonzero(fit.beta)) <= set(fit.pattern.support)
