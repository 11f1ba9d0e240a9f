"""Pattern priors, evaluated in log space up to their normalizing constants.

All three priors share the form ``(k / (2 e C)) ** k`` where ``k`` is a
complexity of the pattern: the number of selected covariates (``spa``),
that number plus a structural penalty (``ssa``), or the minimum number of
groups covering the pattern (``gsa``).  Patterns with more than ``R``
covariates get zero mass.  Only differences of log priors are ever used,
so the normalizing constants are never computed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .core import SparsityPattern
from .groups import INFEASIBLE, EXACT_COVER_LIMIT, GroupStructure, grouped_l0
from .structure import PenaltySpec, penalized_norm

NEG_INF = -math.inf
LOG_HALF = math.log(0.5)
PRIOR_VARIANTS = ("spa", "ssa", "gsa")


@dataclass
class PriorSpec:
    variant: str
    M: int
    R: int
    C: int | None = None
    penalty: PenaltySpec | None = None
    groups: GroupStructure | None = None
    simplified: bool = True
    cover_limit: int = field(default=EXACT_COVER_LIMIT, repr=False)

    def __post_init__(self):
        if self.variant not in PRIOR_VARIANTS:
            raise ValueError(f"unknown prior variant {self.variant!r}; expected spa, ssa or gsa")
        if self.variant == "ssa" and self.penalty is None:
            raise ValueError("ssa prior needs a structural penalty")
        if self.variant == "gsa" and self.groups is None:
            raise ValueError("gsa prior needs a group structure")
        if self.penalty is not None and self.penalty.M != self.M:
            raise ValueError("penalty dimension does not match M")
        if self.groups is not None and self.groups.M != self.M:
            raise ValueError("group structure dimension does not match M")
        if self.C is None:
            self.C = len(self.groups) if self.variant == "gsa" else self.M
        if not 1 <= self.R <= self.M:
            raise ValueError(f"need 1 <= R <= M, got R={self.R}, M={self.M}")
        if self.C < 1:
            raise ValueError("C must be at least 1")

    @classmethod
    def spa(cls, M, R=None, simplified=True):
        return cls("spa", M, M if R is None else R, simplified=simplified)

    @classmethod
    def ssa(cls, penalty, R=None, simplified=True):
        return cls("ssa", penalty.M, penalty.M if R is None else R, penalty=penalty,
                   simplified=simplified)

    @classmethod
    def gsa(cls, groups, R=None, simplified=True):
        return cls("gsa", groups.M, groups.M if R is None else R, groups=groups,
                   simplified=simplified)

    @property
    def strong_hierarchy(self) -> bool:
        return self.penalty is not None and self.penalty.strong_hierarchy

    def to_json(self):
        out = {"variant": self.variant, "M": self.M, "R": self.R, "C": self.C,
               "simplified": self.simplified}
        if self.penalty is not None:
            out["penalty"] = self.penalty.to_json()
        if self.groups is not None:
            out["groups"] = self.groups.to_json()
        return out


def complexity(p: SparsityPattern, spec: PriorSpec) -> float:
    """The exponent ``k(p)`` of the prior; :data:`INFEASIBLE` for non-unions of groups."""
    if spec.variant == "spa":
        return p.count
    if spec.variant == "ssa":
        return penalized_norm(p, spec.penalty)
    return grouped_l0(p, spec.groups, exact_limit=spec.cover_limit)


def log_weight_of_complexity(k, C) -> float:
    """``k log(k / (2 e C))`` with ``0 log 0 = 0``."""
    if k == 0:
        return 0.0
    if k == INFEASIBLE:
        return NEG_INF
    return k * (math.log(k / (2.0 * C)) - 1.0)


def _mass_override(p: SparsityPattern, spec: PriorSpec):
    """Log prior for the cases that do not depend on the complexity, else None."""
    if not spec.simplified and p.count == spec.M:
        return LOG_HALF
    if p.count > spec.R:
        return NEG_INF
    if spec.strong_hierarchy and not spec.penalty.respects_hierarchy(p):
        return NEG_INF
    return None


def log_prior_unnormalized(p: SparsityPattern, spec: PriorSpec, k=None) -> float:
    """Log of the prior mass of ``p`` times the (unknown) normalizing constant.

    ``k`` may be passed when the complexity is already known.  With
    ``simplified=False`` the full model gets log(1/2), taking priority over
    the rank cut-off.
    """
    fixed = _mass_override(p, spec)
    if fixed is not None:
        return fixed
    if k is None:
        k = complexity(p, spec)
    return log_weight_of_complexity(k, spec.C)


def log_prior_ratio(q: SparsityPattern, p: SparsityPattern, spec: PriorSpec) -> float:
    """``log(pi_q / pi_p)``; -inf whenever ``q`` has zero mass."""
    lq = log_prior_unnormalized(q, spec)
    if lq == NEG_INF:
        return NEG_INF
    lp = log_prior_unnormalized(p, spec)
    if lp == NEG_INF:
        return math.inf
    return lq - lp


def spa_log_ratio_closed_form(kq: int, kp: int, M: int) -> float:
    """Log of ``(1 + (kq - kp)/kp) ** kq * (kp / (2 e M)) ** (kq - kp)`` for ``kp >= 1``."""
    if kp < 1:
        raise ValueError("closed form needs at least one selected covariate in p")
    if kq == 0:
        return -kp * (math.log(kp / (2.0 * M)) - 1.0)
    return kq * math.log1p((kq - kp) / kp) + (kq - kp) * (math.log(kp / (2.0 * M)) - 1.0)


@dataclass
class AssumptionReport:
    """Outcome of an assumption scan.

    ``violators`` holds ``(support, reason)`` pairs; reason is
    ``"inequality"`` for a failure of the assumption itself and
    ``"penalty_bound"`` for a failure of the sufficient condition.
    """

    checked: int
    sufficient_condition: bool
    violators: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violators

    def summary(self) -> str:
        if self.sufficient_condition:
            status = "guaranteed"
        elif self.violators:
            status = "violated"
        else:
            status = "not guaranteed"
        return (f"{status}: checked {self.checked} patterns, "
                f"{len(self.violators)} violations")

    def to_json(self):
        return {"checked": self.checked, "sufficient_condition": self.sufficient_condition,
                "passed": self.passed, "summary": self.summary(),
                "violators": [[[int(i) + 1 for i in s], r] for s, r in self.violators],
                "detail": self.detail}


def _assumption_holds(l0, k, C):
    return l0 / k <= math.log1p(math.e * C / max(k, 1))


def all_patterns(M):
    for key in range(1 << M):
        yield SparsityPattern.from_int(key, M)


def check_assumption_penalized(spec: PriorSpec, patterns=None) -> AssumptionReport:
    """Check ``||p||_0 / ||p||_{0,c} <= log(1 + e M / max(||p||_{0,c}, 1))``.

    Only patterns with ``0 < ||p||_0 < R`` are subject to the assumption.
    The sufficient condition ``||p||_c <= M`` is checked on the same
    patterns.  ``patterns=None`` scans all 2^M patterns.
    """
    if spec.variant != "ssa":
        raise ValueError("penalized assumption applies to the ssa prior")
    if patterns is None:
        patterns = all_patterns(spec.M)
    checked = 0
    violators = []
    worst = 0.0
    bound_ok = True
    for p in patterns:
        pen = spec.penalty(p) if p.count else 0.0
        if pen > spec.M or pen < 0:
            bound_ok = False
            violators.append((p.support.tolist(), "penalty_bound"))
        if 0 < p.count < spec.R:
            checked += 1
            k = p.count + pen
            if not _assumption_holds(p.count, k, spec.M):
                violators.append((p.support.tolist(), "inequality"))
            worst = max(worst, (p.count / k) / math.log1p(math.e * spec.M / max(k, 1)))
    return AssumptionReport(checked, bound_ok, violators, {"max_ratio": worst})


def check_assumption_grouped(spec: PriorSpec, exhaustive_limit=20) -> AssumptionReport:
    """Check the grouped-l0 assumption.

    Evaluates the sufficient condition ``max_g |g| <= log(1 + e|G|/R)`` and,
    when there are at most ``exhaustive_limit`` groups, tests the
    assumption on every union of groups with ``0 < ||p||_0 < R``.
    """
    if spec.variant != "gsa":
        raise ValueError("grouped assumption applies to the gsa prior")
    G = spec.groups
    threshold = math.log1p(math.e * len(G) / spec.R)
    sufficient = G.max_size() <= threshold
    detail = {"max_group_size": G.max_size(), "threshold": threshold, "exhaustive": False}
    checked = 0
    violators = []
    if len(G) <= exhaustive_limit:
        detail["exhaustive"] = True
        seen = set()
        for r in range(1, len(G) + 1):
            for sel in itertools.combinations(range(len(G)), r):
                bits = G.masks[list(sel)].any(axis=0)
                key = bits.tobytes()
                if key in seen:
                    continue
                seen.add(key)
                p = SparsityPattern(bits)
                if not 0 < p.count < spec.R:
                    continue
                checked += 1
                k = grouped_l0(p, G)
                if not _assumption_holds(p.count, k, len(G)):
                    violators.append((p.support.tolist(), "inequality"))
    return AssumptionReport(checked, sufficient, violators, detail)


def strong_hierarchy_violations(p: SparsityPattern, penalty: PenaltySpec):
    """Selected nodes whose DAG ancestors are not all selected."""
    bits = p.bits
    return [int(i) for i in p.support
            if not all(bits[a] for a in penalty.ancestors(int(i)))]
