"""Structural penalties: set functions on sparsity patterns.

Every penalty is zero on the empty pattern.  ``penalized_norm`` adds the
penalty to the plain count of selected covariates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SparsityPattern

VARIANTS = ("weights", "dag_ancestors", "cut", "clusters")


class DistanceSpec:
    """Pairwise covariate distances, given as a matrix or as point positions.

    With positions the Euclidean distances are computed on demand, so only
    O(M k) numbers are stored.
    """

    def __init__(self, matrix=None, positions=None):
        if (matrix is None) == (positions is None):
            raise ValueError("give exactly one of matrix or positions")
        self.matrix = None
        self.positions = None
        if matrix is not None:
            D = np.array(matrix, dtype=float)
            if D.ndim != 2 or D.shape[0] != D.shape[1]:
                raise ValueError("distance matrix must be square")
            if not np.allclose(D, D.T):
                raise ValueError("distance matrix must be symmetric")
            if np.any(D < 0):
                raise ValueError("distances must be nonnegative")
            if np.any(np.diag(D) != 0):
                raise ValueError("distance matrix must have a zero diagonal")
            D.setflags(write=False)
            self.matrix = D
        else:
            P = np.array(positions, dtype=float)
            if P.ndim == 1:
                P = P.reshape(-1, 1)
            P.setflags(write=False)
            self.positions = P

    @classmethod
    def line(cls, M):
        return cls(positions=np.arange(1, M + 1, dtype=float))

    @classmethod
    def lattice(cls, width, height=None):
        height = width if height is None else height
        rows, cols = np.divmod(np.arange(width * height), width)
        return cls(positions=np.column_stack([rows, cols]).astype(float))

    @property
    def M(self) -> int:
        src = self.matrix if self.matrix is not None else self.positions
        return src.shape[0]

    def block(self, rows, cols) -> np.ndarray:
        """Distances between the index lists ``rows`` and ``cols``."""
        if self.matrix is not None:
            return self.matrix[np.ix_(rows, cols)]
        a = self.positions[rows]
        b = self.positions[cols]
        diff = a[:, None, :] - b[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def to_json(self):
        if self.matrix is not None:
            return {"distance_matrix": self.matrix.tolist()}
        return {"positions": self.positions.tolist()}


class UnionFind:
    """Disjoint sets over 0..size-1 with path halving and union by size."""

    def __init__(self, size):
        self.parent = list(range(size))
        self.sz = [1] * size
        self.components = size

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.sz[ra] < self.sz[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.sz[ra] += self.sz[rb]
        self.components -= 1
        return True


def _check_dag(M, edges):
    children = [[] for _ in range(M)]
    parents = [[] for _ in range(M)]
    for a, b in edges:
        if not (0 <= a < M and 0 <= b < M):
            raise ValueError(f"edge ({a}, {b}) out of range for M={M}")
        if a == b:
            raise ValueError("self loops are not allowed in a DAG")
        children[a].append(b)
        parents[b].append(a)
    # Kahn's algorithm
    indeg = [len(p) for p in parents]
    stack = [i for i in range(M) if indeg[i] == 0]
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    if seen != M:
        raise ValueError("graph contains a cycle")
    return parents


@dataclass
class PenaltySpec:
    """A structural penalty ``||.||_c`` of one of the supported variants.

    Build with the classmethods :meth:`weights`, :meth:`dag`, :meth:`cut`
    and :meth:`clusters` rather than directly.
    """

    variant: str
    M: int
    c: np.ndarray | None = None
    edges: list = field(default_factory=list)
    distance: DistanceSpec | None = None
    h: float | None = None
    strong_hierarchy: bool = False
    _parents: list | None = field(default=None, repr=False)
    _ancestors: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown penalty variant {self.variant!r}")
        if self.variant == "weights":
            c = np.asarray(self.c, dtype=float)
            if c.shape != (self.M,):
                raise ValueError(f"weights must have length M={self.M}")
            if np.any(c <= 0) or c.sum() >= self.M:
                raise ValueError("weights need c_i > 0 and sum(c) < M")
            self.c = c
        elif self.variant == "dag_ancestors":
            self.edges = [(int(a), int(b)) for a, b in self.edges]
            self._parents = _check_dag(self.M, self.edges)
            self._ancestors = [self._collect_ancestors(i) for i in range(self.M)]
        else:
            if self.distance is None or self.distance.M != self.M:
                raise ValueError(f"{self.variant} penalty needs a distance over M={self.M}")
            if self.variant == "clusters" and not (self.h is not None and self.h > 0):
                raise ValueError("clusters penalty needs h > 0")
        if self.strong_hierarchy and self.variant != "dag_ancestors":
            raise ValueError("strong hierarchy only applies to the DAG penalty")

    def _collect_ancestors(self, i):
        out = set()
        stack = list(self._parents[i])
        while stack:
            a = stack.pop()
            if a not in out:
                out.add(a)
                stack.extend(self._parents[a])
        return frozenset(out)

    @classmethod
    def weights(cls, c):
        c = np.asarray(c, dtype=float)
        return cls("weights", len(c), c=c)

    @classmethod
    def dag(cls, M, edges, strong_hierarchy=False):
        return cls("dag_ancestors", M, edges=list(edges), strong_hierarchy=strong_hierarchy)

    @classmethod
    def cut(cls, distance: DistanceSpec):
        return cls("cut", distance.M, distance=distance)

    @classmethod
    def clusters(cls, distance: DistanceSpec, h=3.0):
        return cls("clusters", distance.M, distance=distance, h=float(h))

    def ancestors(self, i) -> frozenset:
        return self._ancestors[i]

    def respects_hierarchy(self, p: SparsityPattern) -> bool:
        """True when every DAG ancestor of a selected node is also selected."""
        bits = p.bits
        return all(bits[a] for i in p.support for a in self._ancestors[i])

    def __call__(self, p: SparsityPattern) -> float:
        if self.variant == "weights":
            return penalty_weights(p, self.c)
        if self.variant == "dag_ancestors":
            return penalty_dag_ancestors(p, self)
        if self.variant == "cut":
            return penalty_cut(p, self.distance)
        return float(penalty_clusters(p, self.distance, self.h))

    def to_json(self):
        """Inverse of :func:`penalty_from_json` (DAG edges written 1-based)."""
        if self.variant == "weights":
            return {"variant": "weights", "c": self.c.tolist()}
        if self.variant == "dag_ancestors":
            return {"variant": "dag", "M": self.M,
                    "edges": [[a + 1, b + 1] for a, b in self.edges],
                    "strong_hierarchy": self.strong_hierarchy}
        out = {"variant": self.variant}
        if self.variant == "clusters":
            out["h"] = self.h
        out.update(self.distance.to_json())
        return out


def penalty_weights(p: SparsityPattern, c) -> float:
    c = np.asarray(c, dtype=float)
    if c.shape != (p.M,):
        raise ValueError(f"weight vector has length {c.shape[0]}, pattern has M={p.M}")
    return float(c[p.bits].sum())


def penalty_dag_ancestors(p: SparsityPattern, dag: PenaltySpec) -> float:
    """Number of strict ancestors of the support that are not themselves selected."""
    anc = set()
    for i in p.support:
        anc |= dag.ancestors(int(i))
    return float(len(anc.difference(p.support.tolist())))


def penalty_cut(p: SparsityPattern, dist: DistanceSpec) -> float:
    inside = p.support
    outside = np.flatnonzero(~p.bits)
    if inside.size == 0 or outside.size == 0:
        return 0.0
    return float(dist.block(inside, outside).sum())


def penalty_clusters(p: SparsityPattern, dist: DistanceSpec, h: float) -> int:
    """Connected components of the support after dropping edges longer than ``h``.

    Same as cutting a single-linkage dendrogram at height ``h``.
    """
    supp = p.support
    k = supp.size
    if k == 0:
        return 0
    D = dist.block(supp, supp)
    ii, jj = np.nonzero(np.triu(D <= h, 1))
    uf = UnionFind(k)
    for a, b in zip(ii.tolist(), jj.tolist()):
        uf.union(a, b)
    return uf.components


def penalized_norm(p: SparsityPattern, spec: PenaltySpec) -> float:
    """``||p||_0 + ||p||_c``."""
    if p.count == 0:
        return 0.0
    return p.count + spec(p)


def penalty_from_json(obj, M=None) -> PenaltySpec:
    """Build a penalty from its JSON form; DAG edges are 1-based in files."""
    variant = obj.get("variant")
    if variant == "weights":
        return PenaltySpec.weights(obj["c"])
    if variant in ("dag", "dag_ancestors"):
        M = obj.get("M", M)
        if M is None:
            raise ValueError("DAG penalty needs M (in the file or from the data)")
        edges = [(int(a) - 1, int(b) - 1) for a, b in obj.get("edges", [])]
        return PenaltySpec.dag(int(M), edges, bool(obj.get("strong_hierarchy", False)))
    if variant in ("cut", "clusters"):
        if "distance_matrix" in obj:
            dist = DistanceSpec(matrix=obj["distance_matrix"])
        elif "positions" in obj:
            dist = DistanceSpec(positions=obj["positions"])
        elif obj.get("geometry") == "line" and M is not None:
            dist = DistanceSpec.line(M)
        else:
            raise ValueError(f"{variant} penalty needs distance_matrix or positions")
        if variant == "cut":
            return PenaltySpec.cut(dist)
        return PenaltySpec.clusters(dist, obj.get("h", 3.0))
    raise ValueError(f"unknown penalty variant {variant!r}")
