"""Range cover buckets over an aggregation tree and their multi-scale merge.

Bucket ``t`` stands for observation distances in ((1+lam)^t, (1+lam)^(t+1)].
Every node's bucket memberships form one integer interval of ``t``, so both
tables are stored as per-node intervals and individual buckets are produced on
demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

import numpy as np

from rangeagg.core import PointSet, ceil_log_array, dists_to
from rangeagg.tree import AggregationTree

_EMPTY_LO = np.iinfo(np.int64).max // 4
_EMPTY_HI = -_EMPTY_LO


@dataclass(frozen=True, eq=False)
class BucketTable:
    """Node v belongs to bucket t iff t_lo[v] <= t <= t_hi[v]."""

    lam: float
    delta: float
    gamma: int | None
    t_lo: np.ndarray
    t_hi: np.ndarray

    def members(self, t: int) -> np.ndarray:
        return np.flatnonzero((self.t_lo <= t) & (t <= self.t_hi))

    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.t_lo <= self.t_hi)

    @property
    def t_range(self) -> tuple[int, int] | None:
        live = self.nonempty()
        if live.size == 0:
            return None
        return int(self.t_lo[live].min()), int(self.t_hi[live].max())

    def as_dict(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for v in self.nonempty():
            for t in range(int(self.t_lo[v]), int(self.t_hi[v]) + 1):
                out.setdefault(t, []).append(int(v))
        return out

    def total_memberships(self) -> int:
        live = self.nonempty()
        return int((self.t_hi[live] - self.t_lo[live] + 1).sum())


def range_cover(tree: AggregationTree, lam: float, delta: float, gamma: int | None = None) -> BucketTable:
    """Insert every non-root v into the buckets t with r_L <= (1+lam)^t < r_H.

    r_H = s(v_p)/lam and r_L = max(s(v)/lam, s(v_p)/delta).
    """
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    m = tree.num_nodes
    t_lo = np.full(m, _EMPTY_LO, dtype=np.int64)
    t_hi = np.full(m, _EMPTY_HI, dtype=np.int64)
    nodes = np.flatnonzero(tree.parent >= 0)
    sp = tree.s[tree.parent[nodes]]
    live = sp > 0  # a zero-size parent leaves an empty interval
    nodes, sp = nodes[live], sp[live]
    r_hi = sp / lam
    r_lo = np.maximum(tree.s[nodes] / lam, sp / delta)
    base = 1.0 + lam
    t_lo[nodes] = ceil_log_array(r_lo, base)
    t_hi[nodes] = ceil_log_array(r_hi, base) - 1
    return BucketTable(lam, delta, gamma, t_lo, t_hi)


@dataclass(eq=False)
class MergedBucket:
    t: int
    nodes: np.ndarray
    reps: np.ndarray
    _owner: "MultiScale" = field(repr=False)

    @property
    def structure(self) -> Any:
        return self._owner.structure(self.t)


class MultiScale:
    """Buckets B+_t that merge range-cover buckets t..t+Gamma.

    v is in B+_t iff s(v) <= lam (1+lam)^t, v is in some range-cover bucket
    t' with t <= t' <= t+Gamma, and no proper descendant of v qualifies. The
    range cover is taken with delta (1+lam)^Gamma. The constrained structure of
    a bucket is built by ``builder(bucket)`` on first request and cached.
    """

    def __init__(
        self,
        tree: AggregationTree,
        lam: float,
        delta: float,
        gamma: int,
        builder: Callable[[MergedBucket], Any] | None = None,
    ):
        if int(gamma) != gamma or gamma < 1:
            raise ValueError(f"Gamma must be an integer >= 1, got {gamma}")
        self.tree = tree
        self.lam = float(lam)
        self.delta = float(delta)
        self.gamma = int(gamma)
        self.builder = builder
        self.table = range_cover(tree, lam, delta * (1.0 + lam) ** gamma, gamma)
        live = self.table.t_lo <= self.table.t_hi
        s_floor = np.full(tree.num_nodes, _EMPTY_HI, dtype=np.int64)
        pos = live & (tree.s > 0)
        s_floor[pos] = ceil_log_array(tree.s[pos] / lam, 1.0 + lam)
        self.cand_lo = np.where(live, np.maximum(self.table.t_lo - self.gamma, s_floor), _EMPTY_LO)
        self.cand_hi = np.where(live, self.table.t_hi, _EMPTY_HI)
        self._buckets: dict[int, MergedBucket | None] = {}
        self._structures: dict[int, Any] = {}

    @property
    def t_range(self) -> tuple[int, int] | None:
        live = np.flatnonzero(self.cand_lo <= self.cand_hi)
        if live.size == 0:
            return None
        return int(self.cand_lo[live].min()), int(self.cand_hi[live].max())

    def nodes(self, t: int) -> np.ndarray:
        """Members of B+_t in ascending node id."""
        cand = np.flatnonzero((self.cand_lo <= t) & (t <= self.cand_hi))
        if cand.size <= 1:
            return cand
        lo, hi = self.tree.lo[cand], self.tree.hi[cand]
        order = np.lexsort((-hi, lo))
        lo, hi, cand = lo[order], hi[order], cand[order]
        # spans are laminar: after sorting by (lo, -hi) a node has a candidate
        # descendant exactly when the next span starts inside it
        covers_next = np.zeros(cand.size, dtype=bool)
        covers_next[:-1] = lo[1:] < hi[:-1]
        return np.sort(cand[~covers_next])

    def bucket(self, t: int) -> MergedBucket | None:
        t = int(t)
        if t not in self._buckets:
            nodes = self.nodes(t)
            self._buckets[t] = MergedBucket(t, nodes, self.tree.re[nodes], self) if nodes.size else None
        return self._buckets[t]

    def structure(self, t: int) -> Any:
        t = int(t)
        if t not in self._structures:
            b = self.bucket(t)
            if b is None or self.builder is None:
                return None
            self._structures[t] = self.builder(b)
        return self._structures[t]

    def built_structures(self) -> dict[int, Any]:
        return dict(self._structures)

    def __iter__(self) -> Iterator[MergedBucket]:
        rng = self.t_range
        if rng is None:
            return
        for t in range(rng[0], rng[1] + 1):
            b = self.bucket(t)
            if b is not None:
                yield b

    def total_memberships(self) -> int:
        return sum(b.nodes.size for b in self)


def multi_scale(tree: AggregationTree, lam: float, delta: float, gamma: int, builder=None) -> MultiScale:
    return MultiScale(tree, lam, delta, gamma, builder)


@dataclass
class CoverageWitness:
    case: int  # 1: p lies in exactly one member; 2: separation witness
    node: int | None
    separation: float = math.inf
    bound: float = 0.0
    holds: bool = True


def coverage_check(
    tree: AggregationTree, ms: MultiScale, t: int, p: int, points: PointSet | np.ndarray
) -> CoverageWitness:
    """Decide which side of the bucket dichotomy point ``p`` falls on at scale ``t``."""
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    nodes = ms.nodes(t)
    pos = tree.lo[p]
    owners = nodes[(tree.lo[nodes] <= pos) & (pos < tree.hi[nodes])]
    if owners.size == 1:
        return CoverageWitness(1, int(owners[0]))
    if owners.size > 1:
        return CoverageWitness(1, int(owners[0]), holds=False)
    limit = (1.0 + ms.lam) ** t
    # farthest ancestor of the leaf with s/lam <= (1+lam)^t; s grows along the path
    v = None
    for u in tree.path_to_root(p):
        if tree.s[u] / ms.lam <= limit:
            v = u
        else:
            break
    bound = ms.delta / tree.distortion_bound * (1.0 + ms.lam) ** (t + ms.gamma)
    if v is None:
        return CoverageWitness(2, None, 0.0, bound, False)
    inside = np.zeros(tree.n, dtype=bool)
    inside[tree.points(v)] = True
    if inside.all():
        return CoverageWitness(2, int(v), math.inf, bound, True)
    sep = float(dists_to(coords[~inside], coords[p]).min())
    return CoverageWitness(2, int(v), sep, bound, sep > bound)
