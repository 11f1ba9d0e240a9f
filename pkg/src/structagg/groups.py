"""Group structures, the grouped l0 count and the overlapping grouped l1 norm."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SparsityPattern

#: value of the grouped l0 count for a pattern that is not a union of groups
INFEASIBLE = math.inf

EXACT_COVER_LIMIT = 24


class GroupStructure:
    """A collection of (possibly overlapping) index sets covering 0..M-1."""

    def __init__(self, groups, M=None):
        groups = [tuple(sorted({int(i) for i in g})) for g in groups]
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("groups must be non-empty")
        top = max(max(g) for g in groups)
        M = top + 1 if M is None else int(M)
        if min(min(g) for g in groups) < 0 or top >= M:
            raise ValueError(f"group index out of range for M={M}")
        covered = set().union(*groups)
        if len(covered) != M:
            missing = sorted(set(range(M)) - covered)
            raise ValueError(f"groups do not cover every covariate; missing {missing[:10]}")
        self.groups = groups
        self.M = M
        self.masks = np.zeros((len(groups), M), dtype=bool)
        for k, g in enumerate(groups):
            self.masks[k, list(g)] = True
        self.masks.setflags(write=False)
        self.cover_flag = True
        self.disjoint_flag = sum(len(g) for g in groups) == M

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __repr__(self):
        return f"GroupStructure(M={self.M}, groups={self.groups})"

    @classmethod
    def from_json(cls, obj, M=None):
        """``{"groups": [[1, 2], [2, 3]]}`` with 1-based indices."""
        return cls([[int(i) - 1 for i in g] for g in obj["groups"]], M=obj.get("M", M))

    def to_json(self):
        return {"groups": [[i + 1 for i in g] for g in self.groups], "M": self.M}

    def max_size(self) -> int:
        return max(len(g) for g in self.groups)


@dataclass(frozen=True)
class GroupDecomposition:
    """Parts ``v_g`` (one row per group) with ``supp(v_g)`` inside ``g`` summing to beta."""

    parts: np.ndarray

    def total(self):
        return self.parts.sum(axis=0)

    def norm(self):
        return float(np.linalg.norm(self.parts, axis=1).sum())


def group_union_pattern(selected, G: GroupStructure) -> SparsityPattern:
    selected = list(selected)
    if not selected:
        return SparsityPattern.empty(G.M)
    return SparsityPattern(G.masks[selected].any(axis=0))


def _exact_min_cover(target: frozenset, sets: list) -> int | float:
    """Smallest number of ``sets`` whose union is ``target`` (all sets lie in target)."""
    if not target:
        return 0
    by_elem = {e: [s for s in sets if e in s] for e in target}
    if any(not v for v in by_elem.values()):
        return INFEASIBLE
    biggest = max(len(s) for s in sets)
    best = [len(sets) + 1]

    def search(uncovered, used):
        if not uncovered:
            best[0] = min(best[0], used)
            return
        if used + math.ceil(len(uncovered) / biggest) >= best[0]:
            return
        # branch on the element with the fewest candidate sets
        e = min(uncovered, key=lambda x: len(by_elem[x]))
        for s in sorted(by_elem[e], key=lambda s: -len(s & uncovered)):
            search(uncovered - s, used + 1)

    search(target, 0)
    return best[0]


def _greedy_cover(target: frozenset, sets: list) -> int | float:
    uncovered = set(target)
    used = 0
    while uncovered:
        s = max(sets, key=lambda s: len(s & uncovered))
        if not s & uncovered:
            return INFEASIBLE
        uncovered -= s
        used += 1
    return used


def grouped_l0(p: SparsityPattern, G: GroupStructure, return_exact=False,
               exact_limit=EXACT_COVER_LIMIT):
    """Minimum number of groups whose union is exactly ``supp(p)``.

    Only groups contained in the support can take part.  Returns
    :data:`INFEASIBLE` when the support is not a union of groups.  With
    more than ``exact_limit`` usable groups a greedy cover is returned
    instead; pass ``return_exact=True`` to get ``(value, is_exact)``.
    """
    if p.count == 0:
        return (0, True) if return_exact else 0
    usable = np.flatnonzero(~np.any(G.masks & ~p.bits, axis=1))
    target = frozenset(p.support.tolist())
    sets = list({frozenset(G.groups[k]) for k in usable})
    if not sets or frozenset().union(*sets) != target:
        value, exact = INFEASIBLE, True
    elif len(sets) <= exact_limit:
        value, exact = _exact_min_cover(target, sets), True
    else:
        value, exact = _greedy_cover(target, sets), False
    return (value, exact) if return_exact else value


def _split_descent(beta, masks, parts, tol, max_sweeps):
    M = masks.shape[1]
    owners = [np.flatnonzero(masks[:, i]) for i in range(M)]
    shared = [i for i in range(M) if len(owners[i]) > 1 and beta[i] != 0]
    sq = (parts ** 2).sum(axis=1)
    obj = float(np.sqrt(sq).sum())
    for _ in range(max_sweeps):
        for i in shared:
            own = owners[i]
            rest = np.sqrt(np.maximum(sq[own] - parts[own, i] ** 2, 0.0))
            total = rest.sum()
            if total > 0:
                share = beta[i] * rest / total
            else:
                share = np.zeros(len(own))
                share[0] = beta[i]
            sq[own] += share ** 2 - parts[own, i] ** 2
            parts[own, i] = share
        sq = (parts ** 2).sum(axis=1)
        new = float(np.sqrt(sq).sum())
        if obj - new < tol:
            return parts, new
        obj = new
    return parts, obj


def grouped_l1(beta, G: GroupStructure, tol=1e-8, max_sweeps=20000,
               return_decomposition=False):
    """Overlapping group norm: min over decompositions of ``sum_g ||v_g||_2``.

    Disjoint structures use the closed form ``sum_g ||beta_g||_2``.  With
    overlaps, each covariate's value is split across the groups containing
    it; one block is the split of one covariate, and the exact block
    minimizer splits ``beta_i`` in proportion to the norms of the other
    entries of each group.  Sweeps stop when the objective changes by less
    than ``tol``.

    Descent slows down when the optimum leaves some group empty, so groups
    are then dropped one at a time (smallest part first) and the descent
    restarted; a drop is kept only if it does not raise the value.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (G.M,):
        raise ValueError(f"beta must have length M={G.M}")
    if G.disjoint_flag:
        parts = np.where(G.masks, beta[None, :], 0.0)
        dec = GroupDecomposition(parts)
        return (dec.norm(), dec) if return_decomposition else dec.norm()

    nz = beta != 0

    def solve(active):
        masks = G.masks[active]
        counts = masks.sum(axis=0)
        init = np.where(masks, beta[None, :] / np.maximum(counts, 1)[None, :], 0.0)
        return _split_descent(beta, masks, init, tol, max_sweeps)

    active = np.ones(len(G), dtype=bool)
    parts, obj = solve(active)
    improved = True
    while improved:
        improved = False
        norms = np.linalg.norm(parts, axis=1)
        for pos in np.argsort(norms, kind="stable"):
            trial = active.copy()
            trial[np.flatnonzero(active)[pos]] = False
            if not trial.any() or np.any(nz & ~G.masks[trial].any(axis=0)):
                continue
            p2, o2 = solve(trial)
            if o2 <= obj:
                active, parts, obj = trial, p2, o2
                improved = True
                break
    full = np.zeros((len(G), G.M))
    full[active] = parts
    dec = GroupDecomposition(full)
    return (obj, dec) if return_decomposition else obj
