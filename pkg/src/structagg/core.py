"""Datasets, sparsity patterns and least squares restricted to a pattern.

The incremental refit keeps an upper-triangular Cholesky factor ``R`` of the
Gram matrix of the selected columns (``R.T @ R == X_S.T @ X_S``), with the
selected columns stored in insertion order.  Adding a column appends a row
and column to ``R``; removing one deletes them and restores the triangle
with a rank-one Cholesky update of the trailing block.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

# a new diagonal entry d with d**2 <= _PIVOT_TOL * ||x_j||^2 means x_j is
# (numerically) in the span of the selected columns
_PIVOT_TOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (length n) and design ``X`` (n x M)."""

    y: np.ndarray
    X: np.ndarray
    sigma2: float | None = None

    def __post_init__(self):
        y = _readonly(self.y).ravel()
        X = _readonly(self.X)
        if X.ndim == 1:
            X = _readonly(X.reshape(-1, 1))
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"y has length {y.shape[0]} but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def M(self) -> int:
        return self.X.shape[1]

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.X))


@dataclass(frozen=True)
class ColumnScaling:
    """Per-column divisors applied by :func:`normalize_columns`."""

    scales: np.ndarray

    def to_original(self, beta):
        """Map coefficients fitted on the normalized design back to raw units."""
        return np.asarray(beta, dtype=float) / self.scales

    def to_normalized(self, beta):
        return np.asarray(beta, dtype=float) * self.scales


def normalize_columns(data: Dataset) -> tuple[Dataset, ColumnScaling]:
    """Divide each column by ``max(1, ||x_i||_2)`` so that ``||x_i||_2 <= 1``.

    Columns that already have norm at most one (including zero columns) are
    left untouched.
    """
    norms = np.linalg.norm(data.X, axis=0)
    scales = np.maximum(1.0, norms)
    scaled = Dataset(data.y, data.X / scales, data.sigma2)
    return scaled, ColumnScaling(_readonly(scales))


class SparsityPattern:
    """An element of {0,1}^M; bit ``i`` set means covariate ``i`` is in the model."""

    __slots__ = ("bits", "count")

    def __init__(self, bits):
        bits = np.array(bits, dtype=bool).ravel()
        bits.setflags(write=False)
        self.bits = bits
        self.count = int(bits.sum())

    @classmethod
    def empty(cls, M):
        return cls(np.zeros(M, dtype=bool))

    @classmethod
    def full(cls, M):
        return cls(np.ones(M, dtype=bool))

    @classmethod
    def from_support(cls, support, M):
        bits = np.zeros(M, dtype=bool)
        bits[list(support)] = True
        return cls(bits)

    @classmethod
    def from_int(cls, key, M):
        bits = np.array([(key >> i) & 1 for i in range(M)], dtype=bool)
        return cls(bits)

    @property
    def M(self) -> int:
        return self.bits.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def flip(self, i) -> "SparsityPattern":
        bits = self.bits.copy()
        bits[i] = not bits[i]
        return SparsityPattern(bits)

    def complement(self) -> "SparsityPattern":
        return SparsityPattern(~self.bits)

    def to_int(self) -> int:
        return sum(1 << int(i) for i in self.support)

    def issubset(self, other: "SparsityPattern") -> bool:
        return bool(np.all(other.bits[self.bits]))

    def __len__(self):
        return self.M

    def __eq__(self, other):
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"SparsityPattern(M={self.M}, support={self.support.tolist()})"


@dataclass
class RestrictedFit:
    """Least squares fit with ``supp(beta)`` inside ``supp(pattern)``.

    ``error`` is the raw residual sum of squares ``||y - X beta||^2``.
    ``active`` lists the selected columns in factor order and ``chol`` is
    the upper Cholesky factor of their Gram matrix, or ``None`` when the
    selected submatrix is rank deficient (the fit then comes from the
    pseudoinverse).
    """

    beta: np.ndarray
    error: float
    pattern: SparsityPattern
    rank: int
    active: list = field(default_factory=list)
    chol: np.ndarray | None = None
    xty: np.ndarray | None = None
    updates: int = 0


def _fit_from_factor(data, pattern, active, chol, xty, updates=0):
    M = data.M
    beta = np.zeros(M)
    if active:
        z = solve_triangular(chol, xty, trans="T", lower=False, check_finite=False)
        coef = solve_triangular(chol, z, lower=False, check_finite=False)
        beta[active] = coef
        resid = data.y - data.X[:, active] @ coef
    else:
        resid = data.y
    return RestrictedFit(beta, float(resid @ resid), pattern, len(active),
                         list(active), chol, xty, updates)


def restricted_ols(data: Dataset, p: SparsityPattern) -> RestrictedFit:
    """Ordinary least squares restricted to the covariates selected by ``p``.

    When the selected columns are linearly dependent the minimum-norm
    minimizer is returned.
    """
    active = [int(i) for i in p.support]
    if not active:
        return _fit_from_factor(data, p, [], np.zeros((0, 0)), np.zeros(0))
    Xs = data.X[:, active]
    gram = Xs.T @ Xs
    xty = Xs.T @ data.y
    try:
        L = np.linalg.cholesky(gram)
        pivots_ok = np.all(np.diag(L) ** 2 > _PIVOT_TOL * np.maximum(np.diag(gram), 1e-300))
    except np.linalg.LinAlgError:
        pivots_ok = False
    if pivots_ok:
        return _fit_from_factor(data, p, active, L.T.copy(), xty)
    coef, _, rank, _ = np.linalg.lstsq(Xs, data.y, rcond=None)
    beta = np.zeros(data.M)
    beta[active] = coef
    resid = data.y - Xs @ coef
    return RestrictedFit(beta, float(resid @ resid), p, int(rank), active, None, None)


def _chol_rank1_update(R, x):
    """Return upper ``R'`` with ``R'.T R' = R.T R + x x.T``."""
    R = R.copy()
    x = x.copy()
    k = R.shape[0]
    for i in range(k):
        r = np.hypot(R[i, i], x[i])
        c = r / R[i, i]
        s = x[i] / R[i, i]
        R[i, i] = r
        if i + 1 < k:
            R[i, i + 1:] = (R[i, i + 1:] + s * x[i + 1:]) / c
            x[i + 1:] = c * x[i + 1:] - s * R[i, i + 1:]
    return R


def ols_update(fit: RestrictedFit, flip: int, data: Dataset,
               refactor_every: int | None = 1000) -> RestrictedFit:
    """Refit after toggling covariate ``flip``, reusing the cached factor.

    Falls back to :func:`restricted_ols` when the factor is unavailable,
    when the enlarged Gram matrix is numerically singular, or after
    ``refactor_every`` consecutive incremental updates.
    """
    pattern = fit.pattern.flip(flip)
    if fit.chol is None or (refactor_every and fit.updates + 1 >= refactor_every):
        return restricted_ols(data, pattern)
    X = data.X
    active = fit.active
    if pattern.bits[flip]:
        x = X[:, flip]
        xx = float(x @ x)
        k = len(active)
        if k:
            r = solve_triangular(fit.chol, X[:, active].T @ x, trans="T",
                                 lower=False, check_finite=False)
            d2 = xx - float(r @ r)
        else:
            r = np.zeros(0)
            d2 = xx
        if not d2 > _PIVOT_TOL * xx:
            return restricted_ols(data, pattern)
        chol = np.zeros((k + 1, k + 1))
        chol[:k, :k] = fit.chol
        chol[:k, k] = r
        chol[k, k] = np.sqrt(d2)
        xty = np.append(fit.xty, x @ data.y)
        new_active = active + [flip]
    else:
        pos = active.index(flip)
        keep = [j for j in range(len(active)) if j != pos]
        chol = fit.chol[np.ix_(keep, keep)]
        if pos < len(active) - 1:
            tail = slice(pos, None)
            chol[tail, tail] = _chol_rank1_update(chol[tail, tail], fit.chol[pos, pos + 1:])
        if chol.size and np.min(np.abs(np.diag(chol))) ** 2 <= _PIVOT_TOL:
            return restricted_ols(data, pattern)
        xty = fit.xty[keep]
        new_active = [active[j] for j in keep]
    return _fit_from_factor(data, pattern, new_active, chol, xty, fit.updates + 1)
