"""Test-only builders and literal-definition reference implementations."""

from __future__ import annotations

import itertools

import numpy as np

from mergetree import HeightedClusterTree
from mergetree.oracle import grid_cluster_tree, make_grid, piecewise_linear, snap_to_grid


def random_tree(rng: np.random.Generator, n: int, *, heights=None, quantize: int | None = None) -> HeightedClusterTree:
    """Random hierarchy by recursive splitting; some nodes get native members."""
    parents: list = []
    natives: list = []

    def build(points, parent):
        node = len(parents)
        parents.append(parent)
        natives.append([])
        pts = list(points)
        rng.shuffle(pts)
        if len(pts) == 1 or rng.random() < 0.2:
            natives[node] = pts
            return
        n_nat = int(rng.integers(0, max(1, len(pts) // 3) + 1))
        natives[node] = pts[:n_nat]
        rest = pts[n_nat:]
        if not rest:
            return
        if len(rest) == 1:
            build(rest, node)
            return
        k = int(rng.integers(2, min(4, len(rest)) + 1))
        cuts = np.sort(rng.choice(np.arange(1, len(rest)), size=k - 1, replace=False))
        for part in np.split(np.array(rest), cuts):
            build(part.tolist(), node)

    build(range(n), None)
    if heights is None:
        heights = rng.random(n)
        if quantize:
            heights = np.floor(heights * quantize) / quantize
    tree = HeightedClusterTree(parents, natives, heights)
    return tree


def member_sets(tree: HeightedClusterTree) -> list[frozenset]:
    """Full member sets by walking parent pointers (no layout involved)."""
    sets = [set(map(int, m)) for m in tree.native_members]
    for v in range(tree.n_nodes):
        p = tree.parents[v]
        while p is not None:
            sets[p].update(map(int, tree.native_members[v]))
            p = tree.parents[p]
    return [frozenset(s) for s in sets]


def merge_height_literal(tree: HeightedClusterTree, i: int, j: int, sets=None) -> float:
    """Height of the smallest cluster holding both points, straight from the sets."""
    sets = sets if sets is not None else member_sets(tree)
    best = min((s for s in sets if i in s and j in s), key=len)
    return float(min(tree.heights[list(best)]))


def merge_matrix_literal(tree: HeightedClusterTree) -> np.ndarray:
    sets = member_sets(tree)
    n = tree.ground_size
    M = np.empty((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        M[i, j] = merge_height_literal(tree, i, j, sets)
    return M


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel a partition (-1 = absent) by order of first appearance."""
    out = np.full(labels.shape, -1, dtype=np.intp)
    mask = labels >= 0
    if mask.any():
        _, first, inv = np.unique(labels[mask], return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        out[mask] = rank[inv]
    return out


def alive_labels(tree: HeightedClusterTree, level: float) -> np.ndarray:
    from mergetree.tree import alive_nodes

    lab = np.full(tree.ground_size, -1, dtype=np.intp)
    for c, v in enumerate(alive_nodes(tree, level)):
        lab[tree.members(v)] = c
    return canonical_labels(lab)


def component_labels(components, size: int) -> np.ndarray:
    lab = np.full(size, -1, dtype=np.intp)
    for c, comp in enumerate(components):
        lab[list(comp.member_indices)] = c
    return canonical_labels(lab)


# -- the eight-point two-peak scenario ------------------------------------------------

EIGHT_X = {"a1": -0.8, "a2": -1.7, "a3": -2.0, "b1": 1.2, "b2": 1.6, "b3": 2.0, "x1": 3.5, "x2": -0.4}
EIGHT_NAMES = ["a1", "a2", "a3", "b1", "b2", "b3", "x1", "x2"]


def eight_point_scenario():
    """Two-peak piecewise-linear density, its grid oracle, eight samples on
    grid vertices, and the hand-built ideal and pathological trees."""
    model = piecewise_linear([-4, -2, 0, 2, 4], [0, 1.0, 0.3, 0.8, 0])
    grid = make_grid(model, ((-4.0, 4.0),), (801,))
    oracle = grid_cluster_tree(grid)
    coords = grid.vertex_coords()[:, 0]
    snap = np.array([int(np.argmin(np.abs(coords - EIGHT_X[name]))) for name in EIGHT_NAMES])
    points = coords[snap][:, None]
    assert np.array_equal(snap_to_grid(points, grid), snap)
    f = grid.values[snap]
    ix = {name: i for i, name in enumerate(EIGHT_NAMES)}
    a1, a2, a3, b1, b2, b3, x1, x2 = (ix[k] for k in EIGHT_NAMES)
    ideal = HeightedClusterTree(
        parents=[None, 0, 1, 2, 3, 4, 1, 6, 7],
        native_members=[[x1], [], [x2], [a1], [a2], [a3], [b1], [b2], [b3]],
        heights=f,
    )
    lazy = HeightedClusterTree(
        parents=[None, 0, 1, 1, 0],
        native_members=[[], [x2], [a1, a2], [a3], [x1, b1, b2, b3]],
        heights=f,
    )
    saddle = float(grid.values[int(np.argmin(np.abs(coords)))])
    return {
        "model": model,
        "grid": grid,
        "oracle": oracle,
        "snap": snap,
        "points": points,
        "f": f,
        "ix": ix,
        "ideal": ideal,
        "lazy": lazy,
        "saddle": saddle,
    }
