"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from helpers import alive_labels, component_labels, eight_point_scenario, random_tree
from mergetree import (
    GridDensity,
    brute_force_level_components,
    brute_force_split_components,
    check_consistency,
    detect_improper_nesting,
    detect_over_segmentation,
    grid_cluster_tree,
    hartigan_disjoint,
    identity_correspondence,
    merge_distortion,
    merge_height_matrix,
    proximity_graph,
    smallest_containing_cluster,
    split_cluster_tree,
    theorem_harness_min_sep_implies_hartigan,
)
from mergetree.diagnostics import detect_improper_nesting_prose
from mergetree.experiment import load_config, run_experiment

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SIZES = (250, 1000, 4000)


def _config(name, **overrides):
    path = CONFIGS / name
    return load_config(json.loads(path.read_text()), base_dir=path.parent, **overrides)


def _run(name, out, **overrides):
    t0 = time.perf_counter()
    rep = run_experiment(_config(name, **overrides), out)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def rsl_run(tmp_path_factory):
    return _run("rsl_two_peak.json", tmp_path_factory.mktemp("rsl"))


@pytest.fixture(scope="module")
def split_run(tmp_path_factory):
    return _run("split_two_peak.json", tmp_path_factory.mktemp("split"))


# 1 ------------------------------------------------------------------------------


def test_c01_split_sweep_matches_flood_fill(report):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    mismatches = levels_checked = 0
    for trial in range(1000):
        n = int(rng.integers(1, 201))
        d = int(rng.integers(1, 3))
        X = rng.random((n, d))
        f = rng.random(n)
        if trial % 4 == 0:
            f = np.floor(f * rng.integers(2, 8)) / 8
        g = proximity_graph(X, float(rng.uniform(0.02, 0.5)) * (n ** (-1.0 / d)) * 4)
        t = split_cluster_tree(X, f, graph=g)
        for lam in np.unique(f):
            levels_checked += 1
            expected = component_labels(brute_force_split_components(g, f, lam), n)
            if not np.array_equal(alive_labels(t, lam), expected):
                mismatches += 1
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and secs < 60
    report("C1 split sweep == flood fill", ok, f"1000 instances, {levels_checked} levels, {mismatches} mismatches, {secs:.1f}s")
    assert ok


# 2 ------------------------------------------------------------------------------


def test_c02_grid_tree_matches_flood_fill(report):
    rng = np.random.default_rng(20240102)
    t0 = time.perf_counter()
    mismatches = levels_checked = 0
    for trial in range(200):
        if trial % 2:
            shape = (int(rng.integers(2, 101)), int(rng.integers(2, 101)))
        else:
            shape = (int(rng.integers(2, 10_001)),)
        size = int(np.prod(shape))
        vals = rng.random(size)
        # a few distinct levels keep the per-level flood fill cheap and force ties
        vals = np.floor(vals * rng.integers(2, 25)) / 4
        grid = GridDensity(tuple((0.0, 1.0) for _ in shape), shape, vals)
        t = grid_cluster_tree(grid)
        for lam in np.unique(vals):
            levels_checked += 1
            expected = component_labels(brute_force_level_components(grid, lam), size)
            if not np.array_equal(alive_labels(t, lam), expected):
                mismatches += 1
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and secs < 60
    report("C2 grid tree == flood fill", ok, f"200 grids, {levels_checked} levels, {mismatches} mismatches, {secs:.1f}s")
    assert ok


# 3 ------------------------------------------------------------------------------


def test_c03_metric_axioms(report):
    rng = np.random.default_rng(20240103)
    worst_triangle = -np.inf
    identity_ok = symmetry_ok = shift_ok = True
    for _ in range(500):
        n = int(rng.integers(1, 30))
        t1, t2, t3 = (random_tree(rng, n, quantize=int(rng.choice([0, 4, 16])) or None) for _ in range(3))
        g = identity_correspondence(n)
        d12, d23, d13 = (merge_distortion(a, b, g) for a, b in ((t1, t2), (t2, t3), (t1, t3)))
        worst_triangle = max(worst_triangle, d13 - d12 - d23)
        identity_ok &= merge_distortion(t1, t1, g) == 0.0
        symmetry_ok &= d12 == merge_distortion(t2, t1, g)
        # heights and shift on a dyadic lattice make every subtraction exact
        h = rng.integers(0, 1024, n) / 1024
        c = int(rng.integers(1, 512)) / 256
        base = t1.with_heights(h)
        shift_ok &= merge_distortion(base, base.with_heights(h + c), g) == c
    ok = identity_ok and symmetry_ok and shift_ok and worst_triangle <= 1e-12
    report(
        "C3 metric axioms",
        ok,
        f"identity={identity_ok} symmetry={symmetry_ok} shift_exact={shift_ok} max triangle excess={worst_triangle:.3g}",
    )
    assert ok


# 4 ------------------------------------------------------------------------------


def test_c04_grid_stability(report):
    rng = np.random.default_rng(20240104)
    worst = -np.inf
    for trial in range(100):
        delta = (0.01, 0.1)[trial % 2]
        shape = (int(rng.integers(20, 400)),) if trial % 4 < 2 else (int(rng.integers(5, 30)), int(rng.integers(5, 30)))
        v = 0.2 + rng.random(int(np.prod(shape)))
        u = rng.uniform(-1, 1, v.size)
        u[int(rng.integers(v.size))] = rng.choice([-1.0, 1.0])
        w = v + delta * u
        assert abs(float(np.max(np.abs(w - v))) - delta) < 1e-15
        box = tuple((0.0, 1.0) for _ in shape)
        d = merge_distortion(
            grid_cluster_tree(GridDensity(box, shape, v)),
            grid_cluster_tree(GridDensity(box, shape, w)),
            identity_correspondence(v.size),
        )
        worst = max(worst, d - float(np.max(np.abs(w - v))))
    ok = worst <= 1e-12
    report("C4 grid stability d <= delta", ok, f"100 trials, max(d - delta) = {worst:.3g}")
    assert ok


# 5 ------------------------------------------------------------------------------


def test_c05_height_stability(report):
    rng = np.random.default_rng(20240105)
    tree = random_tree(rng, 40)
    worst_ratio = 0.0
    worst_excess = -np.inf
    for _ in range(100):
        eta = float(rng.uniform(0.001, 0.5))
        f1 = rng.random(40)
        u = rng.uniform(-1, 1, 40)
        u[int(rng.integers(40))] = 1.0
        f2 = f1 + eta * u
        eta_actual = float(np.max(np.abs(f1 - f2)))
        d = merge_distortion(tree.with_heights(f1), tree.with_heights(f2), identity_correspondence(40))
        worst_excess = max(worst_excess, d - 2 * eta_actual)
        worst_ratio = max(worst_ratio, d / eta_actual)
    ok = worst_excess <= 1e-12
    report("C5 shared-shape stability d <= 2 eta", ok, f"100 trials, max d/eta = {worst_ratio:.4f}, max(d - 2 eta) = {worst_excess:.3g}")
    assert ok


# 6 ------------------------------------------------------------------------------


def test_c06_min_sep_implies_hartigan(report):
    t0 = time.perf_counter()
    out = theorem_harness_min_sep_implies_hartigan(1000, seed=20240106)
    secs = time.perf_counter() - t0
    ok = out.violations == 0 and secs < 30
    report(
        "C6 minimality + separation => Hartigan",
        ok,
        f"{out.violations} violations, {out.tested} cases meeting the hypothesis, {out.skipped} skipped, {secs:.1f}s",
    )
    assert ok and out.tested > 0


# 7 ------------------------------------------------------------------------------


def test_c07_ultrametric(report):
    rng = np.random.default_rng(20240107)
    bad = triples = 0
    for _ in range(200):
        n = int(rng.integers(1, 51))
        t = random_tree(rng, n, quantize=int(rng.choice([0, 3, 10])) or None)
        M = merge_height_matrix(t)
        # m(i,k) >= min(m(i,j), m(j,k)) for every j, checked all at once
        lower = np.minimum(M[:, :, None], M[None, :, :])  # [i, j, k]
        bad += int(np.count_nonzero(M[:, None, :] < lower))
        triples += n**3
    ok = bad == 0
    report("C7 ultrametric inequality", ok, f"{triples} triples on 200 trees, {bad} violations")
    assert ok


# 8, 9 ---------------------------------------------------------------------------


def _trend(rep, secs, label, report):
    med = [rep.median("d_true", n) for n in SIZES]
    decreasing = med[0] > med[1] > med[2]
    halved = med[2] <= 0.5 * med[0]
    ok = decreasing and halved and secs < 180
    report(
        label,
        ok,
        "median d_true "
        + ", ".join(f"n={n}: {m:.4f}" for n, m in zip(SIZES, med))
        + f"; ratio {med[2] / med[0]:.3f}; {secs:.0f}s",
    )
    return ok


def test_c08_rsl_convergence(rsl_run, report):
    rep, secs = rsl_run
    assert _trend(rep, secs, "C8 RSL convergence trend", report)


def test_c09_split_tree_convergence(split_run, report):
    rep, secs = split_run
    assert _trend(rep, secs, "C9 split-tree convergence trend", report)


# 10 -------------------------------------------------------------------------------


def test_c10_eight_point_scenario(report):
    S = eight_point_scenario()
    f, ix, oracle, snap = S["f"], S["ix"], S["oracle"], S["snap"]
    ideal, lazy = S["ideal"], S["lazy"]
    order = ["a3", "a2", "b3", "b2", "b1", "a1", "x2", "x1"]
    ordering = all(f[ix[a]] > f[ix[b]] for a, b in zip(order, order[1:]))

    rb = check_consistency(ideal, oracle, snap)
    ideal_clean = not (rb.minimality_defects or rb.improper_nesting or rb.over_segmentation or rb.hartigan_violations)

    nested = {x for x, _ in detect_improper_nesting(lazy, oracle, snap)}
    prose = {x for x, _ in detect_improper_nesting_prose(lazy)}
    expected = {ix[k] for k in ("a2", "b1", "b2", "b3")}
    nesting_ok = expected <= nested and prose == expected
    over = detect_over_segmentation(lazy, oracle, snap)
    # the component of {f >= f(x1)} that holds A_n and B_n, seen at its own split level
    everything_but_x1 = frozenset(range(8)) - {ix["x1"]}
    over_ok = any(
        frozenset(np.flatnonzero(np.isin(snap, oracle.members(node))).tolist()) == everything_but_x1 and frags >= 2
        for node, _, frags, _ in over
    )
    # samples of the two true clusters just above the saddle
    A = [ix[k] for k in ("x2", "a1", "a2", "a3")]
    B = [ix[k] for k in ("b1", "b2", "b3")]
    hartigan = hartigan_disjoint(lazy, A, B) and hartigan_disjoint(ideal, A, B)
    # in (c) the smallest clusters holding them are A_n and B_n = B + x1
    A_n = set(lazy.members(smallest_containing_cluster(lazy, A)).tolist())
    B_n = set(lazy.members(smallest_containing_cluster(lazy, B)).tolist())
    hartigan &= A_n == set(A) and B_n == set(B) | {ix["x1"]}
    dist = merge_distortion(ideal, lazy, identity_correspondence(8))
    ok = ordering and ideal_clean and nesting_ok and over_ok and hartigan and dist > 0
    names = {i: k for k, i in ix.items()}
    report(
        "C10 two-peak eight-point scenario",
        ok,
        f"ordering={ordering} ideal_clean={ideal_clean} (separation gap {rb.uniform_separation:.4f}) "
        f"nesting={sorted(names[x] for x in nested)} over_segmented={over_ok} hartigan={hartigan} d={dist:.6f}",
    )
    assert ok


# 11 -------------------------------------------------------------------------------


def test_c11_triangle_check_every_row(rsl_run, split_run, report):
    worst = -np.inf
    rows = 0
    for rep, _ in (rsl_run, split_run):
        for r in rep.rows:
            worst = max(worst, r.d_est - r.d_true - r.sup_abs_error)
            rows += 1
    ok = worst <= 1e-9
    report("C11 d_est <= d_true + sup|f - f_est|", ok, f"{rows} rows, max excess {worst:.3g}")
    assert ok


# 12 -------------------------------------------------------------------------------


def test_c12_determinism(rsl_run, split_run, tmp_path, report):
    same = True
    for name, (full, _) in (("rsl_two_peak.json", rsl_run), ("split_two_peak.json", split_run)):
        a, _ = _run(name, tmp_path / f"{name}-a", seeds=[0, 1])
        b, _ = _run(name, tmp_path / f"{name}-b", seeds=[0, 1])
        same &= a.csv_path.read_bytes() == b.csv_path.read_bytes()
        # the same cells inside the full run carry identical values
        expect = [r.csv() for r in full.rows if r.seed in (0, 1)]
        same &= [r.csv() for r in a.rows] == expect
    report("C12 byte-identical reports", same, "seeds [0, 1] rerun twice per estimator and matched against the full run")
    assert same
