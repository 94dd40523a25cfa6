"""Cluster trees equipped with a height function.

A tree stores, for every node, its parent and the points for which it is the
smallest containing cluster ("native members").  Full member sets are the
union over a node's subtree; they are never stored explicitly.  Instead each
subtree occupies a contiguous range of a depth-first point ordering, which
makes containment tests and merge-height blocks cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .unionfind import UnionFind

__all__ = [
    "PointCloud",
    "LevelSetComponent",
    "HeightedClusterTree",
    "Violation",
    "as_points",
    "validate",
    "cluster_height",
    "merge_height",
    "set_merge_height",
    "connected_at_level",
    "separated_at_level",
    "smallest_containing_cluster",
    "merge_height_matrix",
    "alive_nodes",
    "sweep_tree",
    "superlevel_steps",
]


@dataclass(frozen=True)
class PointCloud:
    """A finite sample of ``n`` points in ``d`` dimensions."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.array(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"points must have shape (n, d) with d >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.flatnonzero(~np.all(np.isfinite(arr), axis=1))
            raise ValueError(f"non-finite coordinates in rows {bad[:10].tolist()}")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


def as_points(points) -> np.ndarray:
    """Coerce a ``PointCloud`` or array-like to a float ``(n, d)`` array."""
    if isinstance(points, PointCloud):
        return points.points
    return PointCloud(points).points


@dataclass(frozen=True)
class LevelSetComponent:
    """One connected component of a superlevel set ``{f >= level}``."""

    level: float
    member_indices: frozenset
    component_id: int = 0


@dataclass(frozen=True)
class Violation:
    rule: str
    nodes: tuple = ()
    detail: str = ""

    def __str__(self) -> str:
        where = f" at nodes {list(self.nodes)}" if self.nodes else ""
        return f"{self.rule}{where}: {self.detail}" if self.detail else f"{self.rule}{where}"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class HeightedClusterTree:
    """Hierarchical clustering ``(X, C, h)`` over ground set ``{0, ..., n-1}``.

    Parameters
    ----------
    parents : sequence of int or None
        Parent id of each node; ``None`` marks the root.
    native_members : sequence of sequences of int
        Points whose smallest containing cluster is the node.
    heights : array_like, shape (n,)
        Height of every ground point.
    node_levels : array_like, optional
        Filtration value at which each node was created by a sweep.  Metadata
        only; it plays no role in merge heights.
    synthetic_root : bool
        True when the root was added to satisfy ``X in C`` although the
        underlying filtration never connected all points.

    Construction does not validate; call :func:`validate` for a report.
    Derived structure (depths, ranges, cluster heights) is computed lazily and
    raises ``ValueError`` if the tree is malformed.
    """

    def __init__(
        self,
        parents: Sequence[int | None],
        native_members: Sequence[Iterable[int]],
        heights,
        *,
        node_levels=None,
        synthetic_root: bool = False,
    ):
        if len(parents) != len(native_members):
            raise ValueError("parents and native_members must have the same length")
        self.parents = tuple(None if p is None else int(p) for p in parents)
        self.native_members = tuple(
            _freeze(np.asarray(list(m) if not isinstance(m, np.ndarray) else m, dtype=np.intp).reshape(-1))
            for m in native_members
        )
        self.heights = _freeze(np.array(heights, dtype=np.float64).reshape(-1))
        self.node_levels = None if node_levels is None else _freeze(np.array(node_levels, dtype=np.float64))
        self.synthetic_root = bool(synthetic_root)

    @property
    def ground_size(self) -> int:
        return self.heights.shape[0]

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def __repr__(self) -> str:
        return f"HeightedClusterTree(n={self.ground_size}, nodes={self.n_nodes})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeightedClusterTree):
            return NotImplemented
        return (
            self.parents == other.parents
            and len(self.native_members) == len(other.native_members)
            and all(np.array_equal(a, b) for a, b in zip(self.native_members, other.native_members))
            and self.heights.tobytes() == other.heights.tobytes()
        )

    __hash__ = None

    def with_heights(self, heights) -> "HeightedClusterTree":
        """Same clusters, different height function."""
        heights = np.asarray(heights, dtype=np.float64)
        if heights.shape != self.heights.shape:
            raise ValueError(f"expected {self.ground_size} heights, got {heights.shape}")
        return HeightedClusterTree(
            self.parents,
            self.native_members,
            heights,
            node_levels=self.node_levels,
            synthetic_root=self.synthetic_root,
        )

    # -- derived structure -------------------------------------------------

    @cached_property
    def root(self) -> int:
        roots = [i for i, p in enumerate(self.parents) if p is None]
        if len(roots) != 1:
            raise ValueError(f"tree must have exactly one root, found {len(roots)}")
        return roots[0]

    @cached_property
    def children(self) -> tuple:
        kids: list[list[int]] = [[] for _ in self.parents]
        for i, p in enumerate(self.parents):
            if p is not None:
                if not 0 <= p < len(self.parents):
                    raise ValueError(f"node {i} has unknown parent {p}")
                kids[p].append(i)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def preorder(self) -> np.ndarray:
        order = []
        stack = [self.root]
        children = self.children
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(children[v]))
        if len(order) != self.n_nodes:
            raise ValueError("tree has nodes unreachable from the root (cycle or forest)")
        return _freeze(np.asarray(order, dtype=np.intp))

    @cached_property
    def depth(self) -> np.ndarray:
        depth = np.zeros(self.n_nodes, dtype=np.intp)
        for v in self.preorder[1:]:
            depth[v] = depth[self.parents[v]] + 1
        return _freeze(depth)

    @cached_property
    def _layout(self):
        m = self.n_nodes
        n = self.ground_size
        size = np.array([len(nm) for nm in self.native_members], dtype=np.intp)
        for v in self.preorder[::-1]:
            p = self.parents[v]
            if p is not None:
                size[p] += size[v]
        start = np.zeros(m, dtype=np.intp)
        native_start = np.zeros(m, dtype=np.intp)
        children = self.children
        for v in self.preorder:
            offset = start[v]
            for c in children[v]:
                start[c] = offset
                offset += size[c]
            native_start[v] = offset
        end = start + size
        if end[self.root] != n:
            raise ValueError(f"native members cover {end[self.root]} slots, ground set has {n} points")
        order = np.full(n, -1, dtype=np.intp)
        node_of = np.full(n, -1, dtype=np.intp)
        for v in range(m):
            members = self.native_members[v]
            if len(members) and (members.min() < 0 or members.max() >= n):
                raise ValueError(f"node {v} has native members outside 0..{n - 1}")
            order[native_start[v] : native_start[v] + len(members)] = members
            node_of[members] = v
        position = np.full(n, -1, dtype=np.intp)
        position[order] = np.arange(n)
        if np.any(position < 0) or np.any(order < 0):
            raise ValueError("every point must be a native member of exactly one node")
        return tuple(_freeze(a) for a in (start, end, native_start, order, position, node_of))

    @property
    def node_start(self) -> np.ndarray:
        return self._layout[0]

    @property
    def node_end(self) -> np.ndarray:
        return self._layout[1]

    @property
    def native_start(self) -> np.ndarray:
        return self._layout[2]

    @property
    def point_order(self) -> np.ndarray:
        """Depth-first ordering in which every subtree is a contiguous block."""
        return self._layout[3]

    @property
    def point_position(self) -> np.ndarray:
        return self._layout[4]

    @property
    def node_of(self) -> np.ndarray:
        """Smallest containing cluster of each point."""
        return self._layout[5]

    @cached_property
    def cluster_heights(self) -> np.ndarray:
        h = np.full(self.n_nodes, np.inf)
        for v in range(self.n_nodes):
            members = self.native_members[v]
            if len(members):
                h[v] = self.heights[members].min()
        for v in self.preorder[::-1]:
            p = self.parents[v]
            # NaN propagates upward so validate() can see it
            if p is not None and (h[v] < h[p] or math.isnan(h[v])):
                h[p] = h[v]
        return _freeze(h)

    def members(self, node: int) -> np.ndarray:
        """Full member set of ``node`` (native members plus all descendants')."""
        self._check_node(node)
        return self.point_order[self.node_start[node] : self.node_end[node]]

    def _check_node(self, node) -> int:
        if not isinstance(node, (int, np.integer)) or not 0 <= node < self.n_nodes:
            raise KeyError(f"unknown node id {node!r}")
        return int(node)

    def _check_points(self, idx) -> np.ndarray:
        arr = np.asarray(idx, dtype=np.intp).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= self.ground_size):
            raise IndexError(f"point index out of range 0..{self.ground_size - 1}")
        return arr


# -- operations --------------------------------------------------------------


def validate(tree: HeightedClusterTree) -> list[Violation]:
    """Check the cluster-tree invariants and report every rule that fails.

    Never raises for malformed trees; an empty list means the tree is legal.
    """
    out: list[Violation] = []
    m = tree.n_nodes
    n = tree.ground_size
    if m == 0:
        return [Violation("no root", (), "tree has no nodes")]

    bad_heights = np.flatnonzero(~np.isfinite(tree.heights))
    if bad_heights.size:
        out.append(Violation("non-finite height", (), f"points {bad_heights[:10].tolist()}"))

    parent_ok = True
    for i, p in enumerate(tree.parents):
        if p is not None and not 0 <= p < m:
            out.append(Violation("unknown parent", (i,), f"parent id {p}"))
            parent_ok = False
        elif p == i:
            out.append(Violation("self parent", (i,), ""))
            parent_ok = False
    roots = [i for i, p in enumerate(tree.parents) if p is None]
    if not roots:
        out.append(Violation("no root", (), "every node has a parent"))
    elif len(roots) > 1:
        out.append(Violation("multiple roots", tuple(roots), "a cluster tree has exactly one root"))

    counts = np.zeros(n, dtype=np.intp)
    for v, members in enumerate(tree.native_members):
        if members.size == 0:
            continue
        outside = members[(members < 0) | (members >= n)]
        if outside.size:
            out.append(Violation("point out of range", (v,), f"points {outside[:10].tolist()}"))
        inside = members[(members >= 0) & (members < n)]
        np.add.at(counts, inside, 1)
    missing = np.flatnonzero(counts == 0)
    repeated = np.flatnonzero(counts > 1)
    if missing.size:
        out.append(Violation("point coverage", (), f"points never native: {missing[:10].tolist()}"))
    if repeated.size:
        holders = tuple(
            v for v, members in enumerate(tree.native_members) if np.isin(members, repeated).any()
        )
        out.append(Violation("point coverage", holders, f"points native more than once: {repeated[:10].tolist()}"))

    if not parent_ok or len(roots) != 1:
        return out

    # reachability from the root catches cycles
    kids: list[list[int]] = [[] for _ in range(m)]
    for i, p in enumerate(tree.parents):
        if p is not None:
            kids[p].append(i)
    seen = np.zeros(m, dtype=bool)
    stack = [roots[0]]
    while stack:
        v = stack.pop()
        if seen[v]:
            continue
        seen[v] = True
        stack.extend(kids[v])
    if not seen.all():
        out.append(Violation("cycle", tuple(np.flatnonzero(~seen).tolist()), "nodes unreachable from the root"))
        return out

    sizes = np.array([len(v) for v in tree.native_members], dtype=np.intp)
    if missing.size or repeated.size or any(v.rule == "point out of range" for v in out):
        return out
    ch = tree.cluster_heights
    for v in tree.preorder[::-1]:
        p = tree.parents[v]
        if p is not None:
            sizes[p] += sizes[v]
    for v in np.flatnonzero(sizes == 0):
        out.append(Violation("empty cluster", (int(v),), "node has no members"))
    for v, p in enumerate(tree.parents):
        if p is not None and not ch[v] >= ch[p]:
            out.append(
                Violation("height monotonicity", (p, v), f"child height {ch[v]!r} below parent height {ch[p]!r}")
            )
    return out


def cluster_height(tree: HeightedClusterTree, node_id: int) -> float:
    """Lowest height of any point in the node's full member set."""
    return float(tree.cluster_heights[tree._check_node(node_id)])


def _lca(tree: HeightedClusterTree, a: int, b: int) -> int:
    depth = tree.depth
    parents = tree.parents
    while depth[a] > depth[b]:
        a = parents[a]
    while depth[b] > depth[a]:
        b = parents[b]
    while a != b:
        a = parents[a]
        b = parents[b]
    return a


def merge_height(tree: HeightedClusterTree, i: int, j: int) -> float:
    """Height of the smallest cluster containing both ``i`` and ``j``."""
    i, j = tree._check_points([i, j])
    node = _lca(tree, int(tree.node_of[i]), int(tree.node_of[j]))
    return float(tree.cluster_heights[node])


def smallest_containing_cluster(tree: HeightedClusterTree, S) -> int:
    """Deepest node whose full member set contains every point of ``S``."""
    S = tree._check_points(list(S) if not isinstance(S, np.ndarray) else S)
    if S.size == 0:
        raise ValueError("S must be nonempty")
    pos = tree.point_position[S]
    lo, hi = pos.min(), pos.max()
    node = int(tree.node_of[S[0]])
    start, end = tree.node_start, tree.node_end
    while not (start[node] <= lo and hi < end[node]):
        node = tree.parents[node]
    return node


def set_merge_height(tree: HeightedClusterTree, S) -> float:
    """Infimum of pairwise merge heights over ``S x S`` (diagonal included).

    Every pairwise merge cluster is nested inside the smallest cluster holding
    all of ``S``, and some pair merges exactly there, so the infimum is that
    cluster's height.
    """
    return float(tree.cluster_heights[smallest_containing_cluster(tree, S)])


def connected_at_level(tree: HeightedClusterTree, S, level: float) -> bool:
    return set_merge_height(tree, S) >= level


def separated_at_level(tree: HeightedClusterTree, S, S2, level: float) -> bool:
    """True iff every cross pair of ``S x S2`` merges strictly below ``level``."""
    S = tree._check_points(list(S) if not isinstance(S, np.ndarray) else S)
    S2 = tree._check_points(list(S2) if not isinstance(S2, np.ndarray) else S2)
    if S.size == 0 or S2.size == 0:
        raise ValueError("both sets must be nonempty")
    block = merge_height_matrix(tree, np.concatenate([S, S2]))[: S.size, S.size :]
    return bool(block.max() < level)


def merge_height_matrix(tree: HeightedClusterTree, idx=None) -> np.ndarray:
    """Pairwise merge heights ``M[a, b] = m(idx[a], idx[b])``.

    Points are laid out in depth-first order so that every subtree is a
    contiguous block; each node then writes only the pairs whose lowest
    common cluster it is.  The work is one write per matrix entry plus
    O(nodes) slice operations.  Repeated indices are allowed.
    """
    if idx is None:
        idx = np.arange(tree.ground_size)
    idx = tree._check_points(idx)
    k = idx.size
    pos = tree.point_position[idx]
    order = np.argsort(pos, kind="stable")
    sp = pos[order]
    starts = np.searchsorted(sp, tree.node_start)
    ends = np.searchsorted(sp, tree.node_end)
    nats = np.searchsorted(sp, tree.native_start)
    ch = tree.cluster_heights
    children = tree.children
    M = np.empty((k, k), dtype=np.float64)
    for v in range(tree.n_nodes):
        s, e = starts[v], ends[v]
        if s == e:
            continue
        h = ch[v]
        ns = nats[v]
        if ns < e:
            M[ns:e, s:e] = h
        for c in children[v]:
            a, b = starts[c], ends[c]
            if a == b:
                continue
            if s < a:
                M[a:b, s:a] = h
            if b < e:
                M[a:b, b:e] = h
    inv = np.empty(k, dtype=np.intp)
    inv[order] = np.arange(k)
    return M.take(inv, axis=0).take(inv, axis=1)


def alive_nodes(tree: HeightedClusterTree, level: float) -> list[int]:
    """Nodes that are maximal among clusters of height at least ``level``.

    These are the clusters present "at level ``level``": cluster height
    ``>= level`` while the parent's is ``< level``.  A synthetic root is
    skipped and its children are treated as top-level clusters, since it
    does not correspond to a component of the underlying filtration.
    """
    ch = tree.cluster_heights
    skip = tree.root if tree.synthetic_root else None
    alive = []
    for v, p in enumerate(tree.parents):
        if v == skip or not ch[v] >= level:
            continue
        if p is None or p == skip or ch[p] < level:
            alive.append(v)
    return alive


# -- construction from a monotone sweep ---------------------------------------


def sweep_tree(n: int, steps, heights, *, strict_edges: bool = True) -> HeightedClusterTree:
    """Build the cluster tree of a nested sequence of graphs.

    Parameters
    ----------
    n : int
        Number of ground points.
    steps : iterable of (level, vertices, edges)
        Filtration steps in sweep order.  Within a step, ``vertices`` are
        activated first (in the given order), then ``edges`` (pairs of point
        indices) are unioned in the given order.
    heights : array_like, shape (n,)
        Height function of the resulting tree.

    Every distinct component that appears after some step becomes one node, so
    a component left unchanged by a step is not duplicated.  Nodes created in
    one step are numbered by their smallest point index, which makes the
    result depend only on the component sets at each step and not on the
    order or redundancy of the edges.  If the final graph
    leaves some points inactive or is disconnected, a root holding the full
    ground set is added (``synthetic_root``); inactive points become its
    native members.
    """
    uf = UnionFind(n)
    active = bytearray(n)
    comp_node = [-1] * n
    minv = list(range(n))
    parents: list[int | None] = []
    natives: list[list[int]] = []
    levels: list[float] = []
    find = uf.find

    for level, vertices, edges in steps:
        pending: dict[int, tuple[list[int], list[int]]] = {}
        for v in vertices:
            v = int(v)
            if active[v]:
                raise ValueError(f"vertex {v} activated twice")
            active[v] = 1
            pending[v] = ([], [v])
        for u, v in edges:
            u = int(u)
            v = int(v)
            if strict_edges and not (active[u] and active[v]):
                raise ValueError(f"edge ({u}, {v}) inserted before both endpoints are present")
            ru, rv = find(u), find(v)
            if ru == rv:
                continue
            pu = pending.pop(ru, None) or ([comp_node[ru]], [])
            pv = pending.pop(rv, None) or ([comp_node[rv]], [])
            root = uf.union(ru, rv)
            minv[root] = min(minv[ru], minv[rv])
            if len(pu[0]) + len(pu[1]) < len(pv[0]) + len(pv[1]):
                pu, pv = pv, pu
            pu[0].extend(pv[0])
            pu[1].extend(pv[1])
            pending[root] = pu
        for root in sorted(pending, key=minv.__getitem__):
            kids, nat = pending[root]
            node = len(parents)
            parents.append(None)
            natives.append(sorted(nat))
            levels.append(float(level))
            for c in kids:
                parents[c] = node
            comp_node[root] = node

    tops = sorted({comp_node[find(v)] for v in range(n) if active[v]})
    inactive = [v for v in range(n) if not active[v]]
    synthetic = False
    if len(tops) == 1 and not inactive:
        pass
    else:
        node = len(parents)
        parents.append(None)
        natives.append(inactive)
        levels.append(levels[-1] if levels else math.nan)
        for c in tops:
            parents[c] = node
        synthetic = True
    return HeightedClusterTree(parents, natives, heights, node_levels=levels, synthetic_root=synthetic)


def superlevel_steps(values, edges):
    """Steps of the descending sweep of a vertex function over a graph.

    One step per distinct value, highest first.  A step activates the
    vertices holding that value (by index) and then the edges whose lower
    endpoint holds it (lexicographic order), so after the step the active
    subgraph is the one induced by ``{v : values[v] >= level}``.
    """
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if values.size == 0:
        return
    order = np.lexsort((np.arange(values.size), -values))
    sorted_vals = values[order]
    breaks = np.flatnonzero(np.diff(sorted_vals)) + 1
    groups = np.split(order, breaks)
    level_of_group = sorted_vals[np.concatenate([[0], breaks])]
    if edges.shape[0]:
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        elevel = np.minimum(values[lo], values[hi])
        eorder = np.lexsort((hi, lo, -elevel))
        edges = np.stack([lo[eorder], hi[eorder]], axis=1)
        cuts = np.searchsorted(-elevel[eorder], -level_of_group, side="left")
    else:
        cuts = np.zeros(len(groups), dtype=np.intp)
    cuts = np.append(cuts, edges.shape[0])
    for g, verts in enumerate(groups):
        yield float(level_of_group[g]), verts, edges[cuts[g] : cuts[g + 1]]
