"""Robust single linkage as a nested graph filtration over the radius ``r``.

At radius ``r`` the graph ``G_r`` has the vertices with ``r_k(x) <= r`` and
the edges ``(x_i, x_j)`` between present vertices with
``|x_i - x_j| <= alpha * r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import distances_from, pairwise_distances, rk_radius
from .tree import HeightedClusterTree, as_points, sweep_tree

__all__ = [
    "FiltrationEvent",
    "NestedGraphFiltration",
    "edge_radius",
    "rsl_filtration",
    "filtration_to_tree",
    "graph_at",
    "rsl_tree",
]


@dataclass(frozen=True)
class FiltrationEvent:
    r: float
    vertices: np.ndarray
    edges: np.ndarray  # shape (m, 2), rows (i, j) with i < j


@dataclass(frozen=True)
class NestedGraphFiltration:
    """Ascending events at which vertices or edges enter the graph.

    ``edges="all"`` keeps every edge; ``edges="spanning"`` keeps only a
    minimum spanning forest under insertion radii, which has the same
    components at every ``r`` and hence yields the same cluster tree.
    """

    n: int
    k: int
    alpha: float
    radii: np.ndarray
    events: tuple
    edge_mode: str = "all"
    r_max: float | None = None
    isolated_at_max_r: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.events)

    def graph_at(self, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Vertex and edge sets accumulated up to radius ``r``."""
        verts = [e.vertices for e in self.events if e.r <= r]
        edges = [e.edges for e in self.events if e.r <= r]
        V = np.concatenate(verts) if verts else np.zeros(0, dtype=np.intp)
        E = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.intp)
        return np.sort(V), E


def edge_radius(dist, alpha: float) -> np.ndarray:
    """Smallest float ``r`` with ``dist <= alpha * r`` evaluated in floating point."""
    dist = np.asarray(dist, dtype=np.float64)
    r = dist / alpha
    # the rounded quotient can sit one ulp off either side of the answer
    for _ in range(4):
        low = r * alpha < dist
        if not np.any(low):
            break
        r = np.where(low, np.nextafter(r, np.inf), r)
    for _ in range(4):
        below = np.nextafter(r, -np.inf)
        high = (below * alpha >= dist) & (r > 0)
        if not np.any(high):
            break
        r = np.where(high, below, r)
    return r


def graph_at(points, k: int, alpha: float, r: float, radii=None) -> tuple[np.ndarray, np.ndarray]:
    """Direct evaluation of the graph definition at one radius (test oracle)."""
    X = as_points(points)
    if radii is None:
        radii = rk_radius(X, k)
    V = np.flatnonzero(radii <= r)
    D = pairwise_distances(X)
    iu, ju = np.triu_indices(X.shape[0], 1)
    keep = (radii[iu] <= r) & (radii[ju] <= r) & (D[iu, ju] <= alpha * r)
    return V, np.stack([iu[keep], ju[keep]], axis=1)


def _all_edges(X, radii, alpha):
    n = X.shape[0]
    iu, ju = np.triu_indices(n, 1)
    D = pairwise_distances(X)
    w = np.maximum(edge_radius(D[iu, ju], alpha), np.maximum(radii[iu], radii[ju]))
    return iu, ju, w


def _spanning_edges(X, radii, alpha):
    # dense Prim: O(n^2) time, O(n) memory
    n = X.shape[0]
    if n < 2:
        return np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros(0)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    link = np.full(n, -1, dtype=np.intp)
    us, vs, ws = [], [], []
    v = 0
    for _ in range(n - 1):
        in_tree[v] = True
        best[v] = np.inf
        w = np.maximum(edge_radius(distances_from(X, X[v]), alpha), np.maximum(radii, radii[v]))
        better = (~in_tree) & (w < best)
        best[better] = w[better]
        link[better] = v
        masked = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(masked))
        us.append(min(nxt, link[nxt]))
        vs.append(max(nxt, link[nxt]))
        ws.append(masked[nxt])
        v = nxt
    return np.array(us, dtype=np.intp), np.array(vs, dtype=np.intp), np.array(ws)


def rsl_filtration(
    points,
    k: int,
    alpha: float,
    *,
    edges: str = "all",
    r_max: float | None = None,
) -> NestedGraphFiltration:
    """Enumerate the robust single linkage filtration at its critical radii.

    An edge enters at ``max(|x_i - x_j| / alpha, r_k(x_i), r_k(x_j))``.
    Radii where nothing new enters are not listed.  Within an event vertices
    come before edges and edges are in lexicographic order.  With ``r_max``
    the filtration stops there; points not connected to anything by then are
    listed in ``isolated_at_max_r``.
    """
    X = as_points(points)
    n = X.shape[0]
    if not (isinstance(alpha, (int, float, np.floating)) and math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be a positive finite number, got {alpha!r}")
    alpha = float(alpha)
    radii = rk_radius(X, k)
    if edges == "all":
        iu, ju, w = _all_edges(X, radii, alpha)
    elif edges == "spanning":
        iu, ju, w = _spanning_edges(X, radii, alpha)
    else:
        raise ValueError(f"edges must be 'all' or 'spanning', got {edges!r}")

    vorder = np.lexsort((np.arange(n), radii))
    eorder = np.lexsort((ju, iu, w))
    iu, ju, w = iu[eorder], ju[eorder], w[eorder]
    if r_max is not None:
        vorder = vorder[radii[vorder] <= r_max]
        keep = w <= r_max
        iu, ju, w = iu[keep], ju[keep], w[keep]
    vr = radii[vorder]
    levels = np.unique(np.concatenate([vr, w]))
    vcut = np.searchsorted(vr, levels, side="right")
    ecut = np.searchsorted(w, levels, side="right")
    events = []
    v0 = e0 = 0
    pairs = np.stack([iu, ju], axis=1)
    for r, v1, e1 in zip(levels, vcut, ecut):
        events.append(FiltrationEvent(float(r), vorder[v0:v1], pairs[e0:e1]))
        v0, e0 = v1, e1

    degree = np.zeros(n, dtype=np.intp)
    np.add.at(degree, iu, 1)
    np.add.at(degree, ju, 1)
    isolated = tuple(np.flatnonzero(degree == 0).tolist()) if n > 1 else ()
    return NestedGraphFiltration(
        n=n,
        k=int(k),
        alpha=alpha,
        radii=radii,
        events=tuple(events),
        edge_mode=edges,
        r_max=r_max,
        isolated_at_max_r=isolated,
    )


def filtration_to_tree(filtration: NestedGraphFiltration, heights) -> HeightedClusterTree:
    """Cluster tree of the components of ``G_r`` over all events."""
    heights = np.asarray(heights, dtype=np.float64).reshape(-1)
    if heights.shape[0] != filtration.n:
        raise ValueError(f"expected {filtration.n} heights, got {heights.shape[0]}")
    steps = ((e.r, e.vertices, e.edges) for e in filtration.events)
    return sweep_tree(filtration.n, steps, heights)


def rsl_tree(points, k: int, alpha: float, heights, *, edges: str = "spanning") -> HeightedClusterTree:
    return filtration_to_tree(rsl_filtration(points, k, alpha, edges=edges), heights)
