"""k-nearest-neighbour radii and the kNN density estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .tree import as_points

__all__ = [
    "KnnProfile",
    "distances_from",
    "pairwise_distances",
    "rk_radius",
    "rk_radius_bruteforce",
    "unit_ball_volume",
    "knn_density",
    "knn_profile",
]

# kd-tree distances may differ from ours in the last ulp; candidates are
# re-ranked with distances_from() so every caller sees the same numbers.
_SLACK = 1e-9


def distances_from(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Euclidean distances from ``x`` to every row of ``points``.

    This is the single distance formula used throughout the package.
    """
    return _norm(points - x)


def _norm(diff: np.ndarray) -> np.ndarray:
    return np.sqrt((diff * diff).sum(axis=-1))


def pairwise_distances(points) -> np.ndarray:
    X = as_points(points)
    return np.stack([distances_from(X, X[i]) for i in range(X.shape[0])]) if X.shape[0] else np.zeros((0, 0))


def _check_k(k: int, n: int):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in 1..{n}, got {k!r}")


def rk_radius_bruteforce(points, k: int) -> np.ndarray:
    """Reference O(n^2) version: sort each row of the distance matrix."""
    X = as_points(points)
    _check_k(k, X.shape[0])
    D = pairwise_distances(X)
    return np.sort(D, axis=1)[:, k - 1]


def rk_radius(points, k: int) -> np.ndarray:
    """Radius of the smallest closed ball around each point holding ``k`` points.

    The point itself counts (rank 1 at distance 0), so ``k = 1`` gives zeros.
    """
    X = as_points(points)
    n = X.shape[0]
    _check_k(k, n)
    if k == 1:
        return np.zeros(n)
    tree = cKDTree(X)
    extra = min(n, k + 8)
    kd_dist, kd_idx = tree.query(X, k=extra)
    kd_dist = kd_dist.reshape(n, extra)
    kd_idx = kd_idx.reshape(n, extra)
    diff = X[kd_idx] - X[:, None, :]
    exact = _norm(diff)
    exact.sort(axis=1)
    radii = exact[:, k - 1]
    if extra < n:
        # a candidate set is trustworthy when the next kd neighbour is clearly
        # farther than the k-th exact distance
        unsure = np.flatnonzero(kd_dist[:, -1] <= radii * (1 + _SLACK) + _SLACK)
        for i in unsure:
            cand = tree.query_ball_point(X[i], kd_dist[i, -1] * (1 + _SLACK) + _SLACK)
            d = np.sort(distances_from(X[cand], X[i]))
            radii[i] = d[k - 1]
    return radii


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in ``R^d``: ``pi^(d/2) / Gamma(d/2 + 1)``."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def knn_density(points, k: int, radii: np.ndarray | None = None) -> np.ndarray:
    """``k / (n * v_d * r_k(x)^d)`` at every sample point.

    Raises ``ValueError`` listing the offending points when some ``r_k`` is 0
    (at least ``k`` coincident points).
    """
    X = as_points(points)
    n, d = X.shape
    if radii is None:
        radii = rk_radius(X, k)
    else:
        _check_k(k, n)
    zero = np.flatnonzero(radii == 0)
    if zero.size:
        raise ValueError(f"zero k-NN radius (duplicate points) at indices {zero[:20].tolist()}")
    return k / (n * unit_ball_volume(d) * radii**d)


@dataclass(frozen=True)
class KnnProfile:
    k: int
    radii: np.ndarray
    density: np.ndarray


def knn_profile(points, k: int) -> KnnProfile:
    radii = rk_radius(points, k)
    return KnnProfile(k, radii, knn_density(points, k, radii))
