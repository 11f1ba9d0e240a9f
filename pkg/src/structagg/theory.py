"""Oracle-inequality bounds for the structured aggregates.

Squared norms are empirical, ``||v||_n^2 = ||v||_2^2 / n``, so the fit term
is ``||X beta - y||_n^2`` and the remainders scale like ``sigma^2 / n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, SparsityPattern
from .groups import grouped_l1
from .priors import PriorSpec, complexity

LOG2 = math.log(2.0)


@dataclass
class BoundInputs:
    """Everything the bounds need about one comparator ``beta``.

    ``fit_term`` is ``||X beta - y||_n^2``; ``complexity`` is the
    structured count of ``beta``'s pattern and ``norm`` its convex
    counterpart (plain l1 or grouped l1).
    """

    fit_term: float
    sigma2: float
    n: int
    M: int
    R: int
    C: int
    complexity: float
    norm: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be at least 1")
        if self.complexity < 0 or self.sigma2 < 0 or self.norm < 0:
            raise ValueError("complexity, sigma2 and norm must be nonnegative")

    @classmethod
    def from_data(cls, data: Dataset, beta, sigma2, prior: PriorSpec, gamma=1.0):
        """Evaluate the fit term, complexity and matching norm of ``beta``."""
        beta = np.asarray(beta, dtype=float)
        r = data.X @ beta - data.y
        p = SparsityPattern(beta != 0)
        k = float(complexity(p, prior))
        if prior.variant == "gsa":
            norm = grouped_l1(beta, prior.groups)
        else:
            norm = float(np.abs(beta).sum())
        return cls(float(r @ r) / data.n, float(sigma2), data.n, data.M, prior.R,
                   prior.C, k, norm, gamma)


def _sparse_term(sigma2, n, k, C):
    return 9.0 * sigma2 * k / n * math.log1p(math.e * C / max(k, 1.0))


def _l1_term(sigma2, n, norm, C, gamma):
    sigma = math.sqrt(sigma2)
    inner = math.log1p(3.0 * math.e * C * sigma / (norm * math.sqrt(gamma * n)))
    return 11.0 * sigma * math.sqrt(gamma) * norm / math.sqrt(n) * math.sqrt(inner)


def remainder_sparse(b: BoundInputs) -> float:
    """``min{sigma^2 R / n, 9 sigma^2 (k/n) log(1 + eC / max(k, 1))}``."""
    return min(b.sigma2 * b.R / b.n, _sparse_term(b.sigma2, b.n, b.complexity, b.C))


def phi(b: BoundInputs) -> float:
    """Three-way remainder of the l1-type bounds; zero for the zero comparator.

    The first entry is ``sigma^2 / n`` as printed for these bounds.
    """
    if b.complexity == 0 or b.norm == 0:
        return 0.0
    return min(b.sigma2 / b.n,
               _sparse_term(b.sigma2, b.n, b.complexity, b.C),
               _l1_term(b.sigma2, b.n, b.norm, b.C, b.gamma))


def bound_prop1(b: BoundInputs) -> float:
    """Penalized-count bound for the structured aggregate (``C = M``)."""
    return b.fit_term + remainder_sparse(b) + 8.0 * b.sigma2 / b.n * LOG2


def bound_prop3(b: BoundInputs) -> float:
    """Grouped-count bound (``C = |G|``, complexity = grouped l0)."""
    return bound_prop1(b)


def bound_prop2(b: BoundInputs) -> float:
    """l1-type bound for the structured aggregate, with the ``sqrt(gamma)`` factor."""
    return b.fit_term + phi(b) + b.sigma2 / b.n * (9.0 * math.log1p(math.e * b.C) + 8.0 * LOG2)


def bound_prop4(b: BoundInputs) -> float:
    """Grouped l1-type bound: ``bound_prop2`` with the grouped norm and ``gamma = 1``."""
    if b.gamma != 1.0:
        b = BoundInputs(b.fit_term, b.sigma2, b.n, b.M, b.R, b.C, b.complexity, b.norm, 1.0)
    return bound_prop2(b)


def bound_report(data: Dataset, beta, sigma2, prior: PriorSpec, gamma=None) -> dict:
    """All applicable bounds for comparator ``beta`` as a JSON-ready dict."""
    if gamma is None:
        gamma = 2.0 if prior.variant == "ssa" and prior.penalty.variant == "clusters" else 1.0
    b = BoundInputs.from_data(data, beta, sigma2, prior, gamma)
    out = {"prior": prior.variant, "n": b.n, "M": b.M, "R": b.R, "C": b.C,
           "sigma2": b.sigma2, "fit_term": b.fit_term, "complexity": b.complexity,
           "norm": b.norm, "gamma": b.gamma}
    if prior.variant == "gsa":
        out["count_bound"] = bound_prop3(b)
        out["norm_bound"] = bound_prop4(b)
    else:
        out["count_bound"] = bound_prop1(b)
        out["norm_bound"] = bound_prop2(b)
    return out


def gamma_for(prior: PriorSpec, patterns) -> float:
    """Smallest gamma with ``||p||_{0,c} <= gamma ||p||_0`` on ``patterns``."""
    g = 1.0
    for p in patterns:
        if p.count:
            g = max(g, float(complexity(p, prior)) / p.count)
    return g

