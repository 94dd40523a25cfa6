from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import eight_point_scenario, random_tree
from mergetree import (
    Correspondence,
    HeightedClusterTree,
    consecutive_distance,
    convergence_curve,
    identity_correspondence,
    inclusion_correspondence,
    merge_distortion,
    snap_correspondence,
)
from mergetree.oracle import GridDensity, grid_cluster_tree


def test_identity_correspondence():
    assert identity_correspondence(1).pairs.tolist() == [[0, 0]]
    assert identity_correspondence(3).pairs.tolist() == [[0, 0], [1, 1], [2, 2]]
    with pytest.raises(ValueError):
        identity_correspondence(0)


def test_inclusion_correspondence():
    g = inclusion_correspondence(range(5), 5)
    assert np.array_equal(g.pairs, identity_correspondence(5).pairs)
    assert inclusion_correspondence(np.arange(250), 1000).pairs.shape == (250, 2)
    with pytest.raises(ValueError):
        inclusion_correspondence([], 4)
    with pytest.raises(IndexError):
        inclusion_correspondence([0, 4], 4)


def test_correspondence_cover_must_be_used():
    Correspondence([[0, 1], [1, 1]], left_cover={0, 1}, right_cover={1})
    with pytest.raises(ValueError):
        Correspondence([[0, 1]], left_cover={0, 2})
    with pytest.raises(ValueError):
        Correspondence([[0, 1]], right_cover={0})
    with pytest.raises(ValueError):
        Correspondence(np.zeros((0, 2)))


def test_distance_to_self_is_zero():
    rng = np.random.default_rng(0)
    t = random_tree(rng, 20)
    assert merge_distortion(t, t, identity_correspondence(20)) == 0.0


def test_constant_shift_is_exact():
    rng = np.random.default_rng(1)
    # dyadic heights and shift keep every subtraction exact
    h = rng.integers(0, 64, 25) / 64.0
    t = random_tree(rng, 25, heights=h)
    c = 0.375
    assert merge_distortion(t, t.with_heights(h + c), identity_correspondence(25)) == c


def test_eight_point_trees_are_at_positive_distance():
    S = eight_point_scenario()
    d = merge_distortion(S["ideal"], S["lazy"], identity_correspondence(8))
    assert d > 0
    assert d == merge_distortion(S["ideal"], S["lazy"], identity_correspondence(8), method="direct")


def test_diagonal_terms_count():
    # same clusters except one point's own height: only the diagonal differs
    a = HeightedClusterTree([None, 0], [[0], [1]], [0.2, 0.9])
    b = HeightedClusterTree([None], [[0, 1]], [0.2, 0.9])
    assert merge_distortion(a, b, identity_correspondence(2)) == pytest.approx(0.7)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_matrix_and_direct_paths_agree_exactly(n, seed):
    rng = np.random.default_rng(seed)
    t1 = random_tree(rng, n)
    t2 = random_tree(rng, n)
    m = int(rng.integers(1, 2 * n + 1))
    pairs = np.stack([rng.integers(0, n, m), rng.integers(0, n, m)], axis=1)
    g = Correspondence(pairs)
    assert merge_distortion(t1, t2, g) == merge_distortion(t1, t2, g, method="direct")


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_symmetry_and_triangle(n, seed):
    rng = np.random.default_rng(seed)
    t1, t2, t3 = (random_tree(rng, n) for _ in range(3))
    g = identity_correspondence(n)
    pairs = np.stack([rng.integers(0, n, n + 3), rng.integers(0, n, n + 3)], axis=1)
    h = Correspondence(pairs)
    assert merge_distortion(t1, t2, h) == merge_distortion(t2, t1, h.transposed())
    assert merge_distortion(t1, t3, g) <= merge_distortion(t1, t2, g) + merge_distortion(t2, t3, g) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_zero_distance_means_identical_merge_heights(n, seed):
    from mergetree import merge_height_matrix

    rng = np.random.default_rng(seed)
    t1 = random_tree(rng, n, quantize=2)
    t2 = random_tree(rng, n, heights=t1.heights)
    if merge_distortion(t1, t2, identity_correspondence(n)) == 0.0:
        assert np.array_equal(merge_height_matrix(t1), merge_height_matrix(t2))


def test_same_shape_height_perturbation_bounded_by_eta():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        t = random_tree(rng, n)
        eta = float(rng.random())
        h2 = t.heights + rng.uniform(-eta, eta, n)
        assert merge_distortion(t, t.with_heights(h2), identity_correspondence(n)) <= eta + 1e-12


def test_rejects_indices_outside_tree():
    t = random_tree(np.random.default_rng(2), 5)
    with pytest.raises(ValueError):
        merge_distortion(t, t, Correspondence([[0, 9]]))


def test_convergence_curve_reference_against_itself():
    values = np.array([0.1, 0.5, 0.3, 0.9, 0.2, 0.7, 0.4])
    grid = GridDensity(((0.0, 6.0),), (7,), values)
    ref = grid_cluster_tree(grid)
    assert convergence_curve(ref, [(ref, np.arange(7))]) == [(7, 0.0)]
    with pytest.raises(ValueError):
        convergence_curve(ref, [(ref, np.array([0, 1, 2, 3, 4, 5, -1]))])
    with pytest.raises(ValueError):
        convergence_curve(ref, [(ref, np.arange(6))])


def test_convergence_curve_vertex_subset_is_zero():
    grid = GridDensity(((0.0, 4.0),), (5,), np.array([1.0, 3.0, 1.0, 3.0, 1.0]))
    ref = grid_cluster_tree(grid)
    # vertices {0, 1, 3}: the root keeps its minimum, both peaks stay
    est = HeightedClusterTree([None, 0, 0], [[0], [1], [2]], [1.0, 3.0, 3.0])
    assert convergence_curve(ref, [(est, np.array([0, 1, 3]))]) == [(3, 0.0)]


def test_convergence_curve_flat_density():
    grid = GridDensity(((0.0, 1.0),), (5,), np.full(5, 2.0))
    ref = grid_cluster_tree(grid)
    est = HeightedClusterTree([None, 0, 0], [[], [0], [1]], [2.0, 2.0])
    assert convergence_curve(ref, [(est, np.array([0, 4]))]) == [(2, 0.0)]


def test_consecutive_distance():
    rng = np.random.default_rng(4)
    t = random_tree(rng, 10)
    assert consecutive_distance(t, t) == 0.0
    big = random_tree(rng, 30)
    assert np.isfinite(consecutive_distance(t, big))
    with pytest.raises(ValueError):
        consecutive_distance(big, t)


def test_snap_correspondence():
    g = snap_correspondence([3, 3, 0])
    assert g.pairs.tolist() == [[0, 3], [1, 3], [2, 0]]
    with pytest.raises(ValueError):
        snap_correspondence([1, -1])
