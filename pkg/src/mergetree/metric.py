"""Merge distortion distance between heighted cluster trees."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tree import HeightedClusterTree, merge_height, merge_height_matrix

__all__ = [
    "Correspondence",
    "identity_correspondence",
    "inclusion_correspondence",
    "snap_correspondence",
    "merge_distortion",
    "convergence_curve",
    "consecutive_distance",
]


@dataclass(frozen=True)
class Correspondence:
    """A relation between a left subset ``S1`` and a right subset ``S2``.

    ``left_cover`` / ``right_cover`` default to the indices that appear in
    ``pairs``; when given explicitly, every declared index must be covered.
    """

    pairs: np.ndarray
    left_cover: frozenset = field(default=None)
    right_cover: frozenset = field(default=None)

    def __post_init__(self):
        pairs = np.array(self.pairs, dtype=np.intp).reshape(-1, 2)
        if pairs.shape[0] == 0:
            raise ValueError("a correspondence needs at least one pair")
        if pairs.min() < 0:
            raise ValueError("correspondence indices must be non-negative")
        pairs.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        used_left = frozenset(pairs[:, 0].tolist())
        used_right = frozenset(pairs[:, 1].tolist())
        for name, used in (("left_cover", used_left), ("right_cover", used_right)):
            declared = getattr(self, name)
            if declared is None:
                object.__setattr__(self, name, used)
                continue
            declared = frozenset(int(i) for i in declared)
            if used - declared:
                raise ValueError(f"pairs use indices outside the declared {name}: {sorted(used - declared)[:10]}")
            if declared - used:
                raise ValueError(f"declared {name} indices never paired: {sorted(declared - used)[:10]}")
            object.__setattr__(self, name, declared)

    @property
    def left(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def right(self) -> np.ndarray:
        return self.pairs[:, 1]

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def transposed(self) -> "Correspondence":
        return Correspondence(self.pairs[:, ::-1], self.right_cover, self.left_cover)


def identity_correspondence(n: int) -> Correspondence:
    if n < 1:
        raise ValueError("identity correspondence needs n >= 1")
    ar = np.arange(n)
    return Correspondence(np.stack([ar, ar], axis=1))


def inclusion_correspondence(subset_indices, superset_size: int) -> Correspondence:
    """Diagonal pairs ``(i, i)`` for a subset of a larger, nested ground set."""
    sub = np.unique(np.asarray(subset_indices, dtype=np.intp).reshape(-1))
    if sub.size == 0:
        raise ValueError("subset must be nonempty")
    if sub.min() < 0 or sub.max() >= superset_size:
        raise IndexError(f"subset index out of range 0..{superset_size - 1}")
    return Correspondence(np.stack([sub, sub], axis=1))


def snap_correspondence(snap) -> Correspondence:
    """Pairs ``(i, snap[i])`` from sample indices to grid vertices."""
    snap = np.asarray(snap, dtype=np.intp).reshape(-1)
    if snap.size == 0:
        raise ValueError("snap map is empty")
    if snap.min() < 0:
        raise ValueError("unsnapped point (negative vertex index) in snap map")
    return Correspondence(np.stack([np.arange(snap.size), snap], axis=1))


def _check(tree: HeightedClusterTree, idx: np.ndarray, side: str):
    if idx.max() >= tree.ground_size:
        raise ValueError(f"{side} correspondence index {idx.max()} outside ground set of size {tree.ground_size}")


def merge_distortion(
    t1: HeightedClusterTree,
    t2: HeightedClusterTree,
    gamma: Correspondence,
    *,
    method: str = "matrix",
) -> float:
    """Largest merge-height discrepancy over all pairs of correspondence pairs.

    ``max |m1(x1, x1') - m2(x2, x2')|`` over ``(x1, x2), (x1', x2')`` in
    ``gamma``, diagonal terms included.

    ``method="matrix"`` builds both restricted merge-height matrices at once;
    ``method="direct"`` evaluates every pair with :func:`merge_height` and is
    kept as the reference path.
    """
    left, right = gamma.left, gamma.right
    _check(t1, left, "left")
    _check(t2, right, "right")
    if method == "direct":
        best = 0.0
        for a in range(len(gamma)):
            for b in range(a, len(gamma)):
                d = abs(merge_height(t1, left[a], left[b]) - merge_height(t2, right[a], right[b]))
                if d > best:
                    best = d
        return best
    if method != "matrix":
        raise ValueError(f"unknown method {method!r}")
    M1 = merge_height_matrix(t1, left)
    M2 = merge_height_matrix(t2, right)
    np.subtract(M1, M2, out=M1)
    np.abs(M1, out=M1)
    return float(M1.max())


def convergence_curve(
    reference: HeightedClusterTree,
    estimates: Sequence[tuple[HeightedClusterTree, np.ndarray]],
) -> list[tuple[int, float]]:
    """Distance from each estimate to a grid reference tree.

    Each estimate comes with a snap map sending its ground points to
    reference vertices; the snap map induces the correspondence.
    """
    curve = []
    for tree, snap in estimates:
        snap = np.asarray(snap, dtype=np.intp)
        if snap.shape != (tree.ground_size,):
            raise ValueError(f"snap map has {snap.size} entries for {tree.ground_size} points")
        if snap.size and (snap.min() < 0 or snap.max() >= reference.ground_size):
            raise ValueError("unsnapped point in snap map")
        curve.append((tree.ground_size, merge_distortion(tree, reference, snap_correspondence(snap))))
    return curve


def consecutive_distance(
    t_i: HeightedClusterTree,
    t_j: HeightedClusterTree,
    gamma: Correspondence | None = None,
) -> float:
    """Distance between trees on nested samples ``X_i`` (prefix) inside ``X_j``."""
    if t_i.ground_size > t_j.ground_size:
        raise ValueError("first tree's ground set must be included in the second's")
    if gamma is None:
        gamma = inclusion_correspondence(np.arange(t_i.ground_size), t_j.ground_size)
    if not np.array_equal(gamma.left, gamma.right):
        raise ValueError("inclusion correspondence must be diagonal")
    return merge_distortion(t_i, t_j, gamma)
