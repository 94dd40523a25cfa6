"""Split-cluster tree: a proximity graph swept from high to low density."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .density import _norm
from .tree import HeightedClusterTree, LevelSetComponent, as_points, superlevel_steps, sweep_tree

__all__ = [
    "ProximityGraph",
    "proximity_graph",
    "split_cluster_tree",
    "brute_force_split_components",
]


@dataclass(frozen=True)
class ProximityGraph:
    """Undirected graph joining points at distance ``<= r``.

    ``edges`` holds each edge once as ``(i, j)`` with ``i < j``, in
    lexicographic order.
    """

    r: float
    n: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        if e.size and (np.any(e[:, 0] >= e[:, 1]) or e.min() < 0 or e.max() >= self.n):
            raise ValueError("edges must be (i, j) pairs with 0 <= i < j < n")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def adjacency(self):
        e = self.edges
        data = np.ones(e.shape[0], dtype=np.int8)
        return coo_matrix((data, (e[:, 0], e[:, 1])), shape=(self.n, self.n)).tocsr()


def _check_r(r):
    if not (isinstance(r, (int, float, np.floating)) and math.isfinite(r) and r > 0):
        raise ValueError(f"r must be a positive finite number, got {r!r}")


def proximity_graph(points, r: float) -> ProximityGraph:
    """Exact closed-threshold proximity graph.

    A kd-tree proposes candidate pairs with a small outward slack, and each
    candidate is kept iff its distance, computed with the package-wide
    formula, is ``<= r``.
    """
    _check_r(r)
    X = as_points(points)
    n = X.shape[0]
    tree = cKDTree(X)
    cand = tree.query_pairs(r * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if cand.shape[0]:
        cand = np.sort(cand, axis=1)
        d = _norm(X[cand[:, 1]] - X[cand[:, 0]])
        cand = cand[d <= r]
        cand = cand[np.lexsort((cand[:, 1], cand[:, 0]))]
    return ProximityGraph(float(r), n, cand.reshape(-1, 2))


def split_cluster_tree(points, density, r: float | None = None, *, graph: ProximityGraph | None = None) -> HeightedClusterTree:
    """Components of the subgraph induced by ``{p : density(p) >= lambda}``,
    for every distinct density value ``lambda`` from high to low.

    Pass either ``r`` (the graph is built here) or a prebuilt ``graph``.
    """
    density = np.asarray(density, dtype=np.float64).reshape(-1)
    if graph is None:
        if r is None:
            raise ValueError("give r or graph")
        graph = proximity_graph(points, r)
    elif r is not None:
        _check_r(r)
    if density.shape[0] != graph.n:
        raise ValueError(f"density has {density.shape[0]} values for {graph.n} points")
    if not np.all(np.isfinite(density)):
        raise ValueError("density values must be finite")
    return sweep_tree(graph.n, superlevel_steps(density, graph.edges), density)


def brute_force_split_components(graph: ProximityGraph, density, level: float) -> list[LevelSetComponent]:
    """Connected components of the induced subgraph on ``{density >= level}``."""
    density = np.asarray(density, dtype=np.float64).reshape(-1)
    keep = np.flatnonzero(density >= level)
    if keep.size == 0:
        return []
    e = graph.edges
    mask = (density[e[:, 0]] >= level) & (density[e[:, 1]] >= level) if e.size else np.zeros(0, bool)
    sub = np.full(graph.n, -1, dtype=np.intp)
    sub[keep] = np.arange(keep.size)
    se = sub[e[mask]]
    A = csr_matrix(
        (np.ones(se.shape[0]), (se[:, 0], se[:, 1])),
        shape=(keep.size, keep.size),
    )
    count, labels = connected_components(A, directed=False)
    order = np.argsort(labels, kind="stable")
    groups = np.split(keep[order], np.cumsum(np.bincount(labels, minlength=count))[:-1])
    comps = [LevelSetComponent(float(level), frozenset(g.tolist()), lab) for lab, g in enumerate(groups)]
    return comps
