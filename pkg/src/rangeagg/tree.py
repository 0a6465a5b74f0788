"""Binary aggregation tree over a point set (single-linkage hierarchy).

Node ids: leaves ``0..n-1`` coincide with point ids, internal nodes are
``n..2n-2`` in merge order, so every child id is smaller than its parent's and
ascending id order is a valid bottom-up order. The root is ``2n-2``.

Sizes: ``s(v) = (|P(v)| - 1) * h(v)`` with ``h(v)`` the merge distance, which
bounds the diameter of ``P(v)`` by a path of at most ``|P(v)| - 1`` MST edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from rangeagg.core import REL_TOL, PointSet, dists_to


@dataclass(frozen=True, eq=False)
class AggregationTree:
    n: int
    d: int
    parent: np.ndarray  # -1 at the root
    left: np.ndarray  # -1 at leaves
    right: np.ndarray
    s: np.ndarray
    height: np.ndarray  # merge distance, 0 at leaves
    re: np.ndarray  # representative point id (lowest id in the node)
    lo: np.ndarray  # P(v) = perm[lo:hi]
    hi: np.ndarray
    perm: np.ndarray

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    @property
    def num_nodes(self) -> int:
        return 2 * self.n - 1

    @property
    def distortion_bound(self) -> float:
        return float(self.d * self.n)

    def is_leaf(self, v: int) -> bool:
        return v < self.n

    def size(self, v: int) -> int:
        return int(self.hi[v] - self.lo[v])

    def points(self, v: int) -> np.ndarray:
        return self.perm[self.lo[v] : self.hi[v]]

    def path_to_root(self, v: int) -> list[int]:
        path = [int(v)]
        while self.parent[path[-1]] >= 0:
            path.append(int(self.parent[path[-1]]))
        return path

    def is_ancestor(self, u: int, v: int) -> bool:
        """True when ``v`` lies in the subtree of ``u`` (u itself included)."""
        return bool(self.lo[u] <= self.lo[v] and self.hi[v] <= self.hi[u])


def _prim_mst(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact Euclidean MST by Prim's algorithm, O(n^2 d) time and O(n) memory."""
    n = coords.shape[0]
    best = np.full(n, np.inf)
    via = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    us, vs, ws = [], [], []
    cur = 0
    done[0] = True
    for _ in range(n - 1):
        dd = dists_to(coords, coords[cur])
        better = (dd < best) & ~done
        best[better] = dd[better]
        via[better] = cur
        masked = np.where(done, np.inf, best)
        nxt = int(np.argmin(masked))
        us.append(int(via[nxt]))
        vs.append(nxt)
        ws.append(float(best[nxt]))
        done[nxt] = True
        cur = nxt
    return np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64), np.array(ws)


def build_tree(points: PointSet | np.ndarray) -> AggregationTree:
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    n, d = coords.shape
    m = 2 * n - 1
    parent = np.full(m, -1, dtype=np.int64)
    left = np.full(m, -1, dtype=np.int64)
    right = np.full(m, -1, dtype=np.int64)
    height = np.zeros(m)
    count = np.ones(m, dtype=np.int64)
    re = np.arange(m, dtype=np.int64)

    if n > 1:
        u, v, w = _prim_mst(coords)
        a, b = np.minimum(u, v), np.maximum(u, v)
        order = np.lexsort((b, a, w))  # by length, then lower endpoint, then upper
        # union-find over points; comp[root point] = current tree node
        uf = np.arange(n)

        def find(x):
            while uf[x] != x:
                uf[x] = uf[uf[x]]
                x = uf[x]
            return x

        comp = np.arange(n, dtype=np.int64)
        for step, e in enumerate(order):
            ra, rb = find(a[e]), find(b[e])
            na, nb = comp[ra], comp[rb]
            node = n + step
            if re[na] > re[nb]:
                na, nb = nb, na
            left[node], right[node] = na, nb
            parent[na] = parent[nb] = node
            height[node] = w[e]
            count[node] = count[na] + count[nb]
            re[node] = re[na]
            uf[rb] = ra
            comp[ra] = node

    s = (count - 1) * height
    # leaf permutation by a left-first traversal
    perm = np.empty(n, dtype=np.int64)
    lo = np.zeros(m, dtype=np.int64)
    hi = np.zeros(m, dtype=np.int64)
    pos = 0
    stack = [m - 1]
    while stack:
        x = stack.pop()
        if x < n:
            perm[pos] = x
            lo[x], hi[x] = pos, pos + 1
            pos += 1
        else:
            stack.append(right[x])
            stack.append(left[x])
    for x in range(n, m):  # children precede parents
        lo[x], hi[x] = lo[left[x]], hi[right[x]]
    return AggregationTree(n, d, parent, left, right, s, height, re, lo, hi, perm)


@dataclass
class TreeReport:
    passed: bool
    violation: str | None = None
    max_distortion: float = 0.0

    def __bool__(self) -> bool:
        return self.passed


def check_tree_properties(tree: AggregationTree, points: PointSet | np.ndarray, tol: float = REL_TOL) -> TreeReport:
    """Exhaustive check of the five aggregation-tree properties; reports the first violation."""
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    n = coords.shape[0]
    if tree.n != n:
        return TreeReport(False, f"tree has {tree.n} leaves for {n} points")
    m = tree.num_nodes
    root = tree.root

    # leaves <-> points
    if sorted(tree.perm.tolist()) != list(range(n)):
        return TreeReport(False, "leaf permutation is not a bijection onto the points")
    for x in range(n):
        if tree.hi[x] - tree.lo[x] != 1 or tree.perm[tree.lo[x]] != x or tree.s[x] != 0:
            return TreeReport(False, f"leaf {x} does not hold exactly its own point with s=0")

    # structure, partition and strict size decrease
    if tree.parent[root] != -1:
        return TreeReport(False, "root has a parent")
    for x in range(n, m):
        lc, rc = tree.left[x], tree.right[x]
        if lc < 0 or rc < 0 or tree.parent[lc] != x or tree.parent[rc] != x:
            return TreeReport(False, f"node {x} does not have two children pointing back to it")
        if not (tree.lo[lc] == tree.lo[x] and tree.hi[lc] == tree.lo[rc] and tree.hi[rc] == tree.hi[x]):
            return TreeReport(False, f"children spans of node {x} do not partition its span")
        if tree.re[x] not in tree.points(x):
            return TreeReport(False, f"representative of node {x} is not one of its points")
        top = max(tree.s[lc], tree.s[rc])
        # coincident points merge at distance 0, where only equality is possible
        if not (tree.s[x] > top or (tree.s[x] == 0.0 and top == 0.0)):
            return TreeReport(False, f"s does not decrease from node {x} to its children")

    # diameters and separation, computed over the permuted distance matrix
    dm = cdist(coords[tree.perm], coords[tree.perm])
    diam = np.zeros(m)
    worst = 0.0
    bound = tree.distortion_bound
    for x in range(n, m):
        lc, rc = tree.left[x], tree.right[x]
        cross = dm[tree.lo[lc] : tree.hi[lc], tree.lo[rc] : tree.hi[rc]].max()
        diam[x] = max(diam[lc], diam[rc], cross)
        if diam[x] > tree.s[x] * (1 + tol) + 1e-12:
            return TreeReport(False, f"diameter {diam[x]:.6g} of node {x} exceeds s={tree.s[x]:.6g}")
    for x in range(m):
        if x == root:
            continue
        lo, hi = tree.lo[x], tree.hi[x]
        rows = dm[lo:hi]
        outside = min(rows[:, :lo].min(initial=np.inf), rows[:, hi:].min(initial=np.inf))
        sp = tree.s[tree.parent[x]]
        if sp == 0.0:
            continue
        if outside == 0.0:
            return TreeReport(False, f"node {x} touches outside points but its parent has s > 0")
        ratio = sp / outside
        worst = max(worst, ratio)
        if ratio > bound * (1 + tol):
            return TreeReport(False, f"distortion {ratio:.6g} at node {x} exceeds {bound:.6g}", worst)
    return TreeReport(True, None, worst)


def lowest_admissible_node(tree: AggregationTree, leaf: int, r_n: float, theta: float) -> int | None:
    """Highest ancestor v of ``leaf`` with s(v) + r_n <= theta, or None.

    s never decreases towards the root, so the admissible nodes form a prefix
    of the leaf-to-root path and a binary search finds its end.
    """
    path = tree.path_to_root(leaf)
    k = int(np.searchsorted(tree.s[path] + r_n, theta, side="right"))
    return path[k - 1] if k > 0 else None
