"""Consistency diagnostics of an empirical cluster tree against the oracle.

The empirical tree lives on the sample ``X_n``; the oracle tree lives on grid
vertices and a snap map sends every sample to a vertex.  An oracle cluster
``A`` is only ever seen through its sample ``A ∩ X_n``.

Most quantities reduce to two ingredients: the samples ordered by the
oracle's depth-first layout (so every oracle cluster is a contiguous range),
and the empirical merge-height matrix in that order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .density import distances_from
from .tree import (
    HeightedClusterTree,
    _lca,
    alive_nodes,
    as_points,
    merge_height_matrix,
    set_merge_height,
    smallest_containing_cluster,
    superlevel_steps,
    sweep_tree,
)

__all__ = [
    "DEFAULT_TOL",
    "ConsistencyReport",
    "OracleComponent",
    "minimality_defect",
    "separation_defect",
    "hartigan_disjoint",
    "restricted_components",
    "detect_improper_nesting",
    "detect_improper_nesting_prose",
    "detect_over_segmentation",
    "uniform_defects",
    "uniform_defects_bruteforce",
    "check_consistency",
    "HarnessOutcome",
    "theorem_harness_min_sep_implies_hartigan",
    "epsilon_sample_radius",
    "min_sep_case",
]

DEFAULT_TOL = 1e-9


def _nonempty(S, name="member set") -> np.ndarray:
    arr = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.intp).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return arr


# -- per-set defects ------------------------------------------------------------


def minimality_defect(emp: HeightedClusterTree, A_members, level: float) -> float:
    """Smallest ``delta >= 0`` such that ``A_members`` is connected at ``level - delta``."""
    A = _nonempty(A_members)
    return max(0.0, float(level) - set_merge_height(emp, A))


def separation_defect(emp: HeightedClusterTree, A_members, B_members, mu: float) -> float:
    """``max(0, max_{a, b} m(a, b) - mu)`` over the cross pairs.

    The sets are separated at ``mu + d`` for every ``d`` strictly larger.
    """
    A = _nonempty(A_members, "A")
    B = _nonempty(B_members, "B")
    M = merge_height_matrix(emp, np.concatenate([A, B]))
    return max(0.0, float(M[: A.size, A.size :].max()) - float(mu))


def hartigan_disjoint(emp: HeightedClusterTree, A_members, B_members) -> bool:
    """True iff the smallest clusters containing each set are disjoint."""
    A = _nonempty(A_members, "A")
    B = _nonempty(B_members, "B")
    a = smallest_containing_cluster(emp, A)
    b = smallest_containing_cluster(emp, B)
    start, end = emp.node_start, emp.node_end
    # nested ranges either contain one another or do not overlap
    return bool(end[a] <= start[b] or end[b] <= start[a])


# -- oracle components as seen by the sample ---------------------------------------


@dataclass(frozen=True)
class OracleComponent:
    """An oracle cluster restricted to the sample.

    ``members`` are sample indices; ``level`` is the superlevel value at
    which it is a component; ``node`` is the oracle node id.
    """

    node: int
    level: float
    members: np.ndarray
    lo: int = 0
    hi: int = 0


class _Layout:
    """Samples sorted by oracle layout position; oracle clusters become ranges."""

    def __init__(self, oracle: HeightedClusterTree, snap, n_samples: int):
        snap = np.asarray(snap, dtype=np.intp).reshape(-1)
        if snap.shape[0] != n_samples:
            raise ValueError(f"snap map has {snap.shape[0]} entries for {n_samples} samples")
        if snap.size and (snap.min() < 0 or snap.max() >= oracle.ground_size):
            raise ValueError("unsnapped sample: snap map entry outside the oracle ground set")
        self.oracle = oracle
        self.snap = snap
        pos = oracle.point_position[snap]
        self.order = np.argsort(pos, kind="stable")
        sp = pos[self.order]
        self.lo = np.searchsorted(sp, oracle.node_start)
        self.hi = np.searchsorted(sp, oracle.node_end)
        self.count = self.hi - self.lo

    def members(self, node: int) -> np.ndarray:
        return self.order[self.lo[node] : self.hi[node]]

    def deep_nodes(self) -> np.ndarray:
        """Oracle nodes holding samples, none of whose children hold all of them."""
        count = self.count
        has_full_child = np.zeros(self.oracle.n_nodes, dtype=bool)
        for v, p in enumerate(self.oracle.parents):
            if p is not None and count[v] == count[p]:
                has_full_child[p] = True
        return np.flatnonzero((count > 0) & ~has_full_child)


def restricted_components(oracle: HeightedClusterTree, snap, levels="auto") -> list[OracleComponent]:
    """Oracle superlevel components that contain samples.

    With ``levels="auto"`` every distinct restricted set is listed once, at
    the highest level at which it is a component; these levels are exactly
    the values taken by oracle merge heights between samples.  With an
    explicit list, the components alive at each listed level are returned.
    """
    lay = _Layout(oracle, snap, len(snap))
    return _components(lay, levels)


def _components(lay: _Layout, levels) -> list[OracleComponent]:
    ch = lay.oracle.cluster_heights
    out = []
    if isinstance(levels, str):
        if levels != "auto":
            raise ValueError(f"levels must be 'auto' or a list of numbers, got {levels!r}")
        for v in lay.deep_nodes():
            out.append(OracleComponent(int(v), float(ch[v]), lay.members(v), int(lay.lo[v]), int(lay.hi[v])))
        return out
    for lam in levels:
        lam = float(lam)
        for v in alive_nodes(lay.oracle, lam):
            if lay.count[v]:
                out.append(OracleComponent(int(v), lam, lay.members(v), int(lay.lo[v]), int(lay.hi[v])))
    return out


# -- whole-tree detectors ---------------------------------------------------------


class _Context:
    """Shared precomputation for one (emp, oracle, snap) triple."""

    def __init__(self, emp: HeightedClusterTree, oracle: HeightedClusterTree, snap):
        self.emp = emp
        self.lay = _Layout(oracle, snap, emp.ground_size)
        # emp merge heights with rows/cols in oracle layout order
        self.M = merge_height_matrix(emp, self.lay.order)
        self.emp_pos = emp.point_position[self.lay.order]

    def set_merge(self, lo: int, hi: int) -> float:
        """Empirical set merge height of the samples in layout range [lo, hi)."""
        seg = self.emp_pos[lo:hi]
        a = lo + int(np.argmin(seg))
        b = lo + int(np.argmax(seg))
        return float(self.M[a, b])

    def fragments(self, lo: int, hi: int, level: float) -> int:
        """Classes of the range under ``m >= level``; contiguous in emp order."""
        idx = np.arange(lo, hi)[np.argsort(self.emp_pos[lo:hi], kind="stable")]
        if idx.size == 1:
            return 1
        links = self.M[idx[:-1], idx[1:]]
        return 1 + int(np.count_nonzero(links < level))


def detect_improper_nesting(
    emp: HeightedClusterTree,
    oracle: HeightedClusterTree,
    snap,
    tol: float = DEFAULT_TOL,
    *,
    _ctx: _Context | None = None,
) -> list[tuple[int, float]]:
    """Samples whose own superlevel component is connected only below their height.

    For a sample ``x`` let ``A`` be the oracle component of ``{f >= f(x)}``
    holding its vertex; ``x`` is reported with
    ``delta = minimality_defect(emp, A ∩ X_n, f(x))`` if ``delta > tol``,
    where ``f(x)`` is the empirical tree's height of ``x``.
    """
    ctx = _ctx or _Context(emp, oracle, snap)
    lay = ctx.lay
    node_of = lay.oracle.node_of[lay.snap]
    cache: dict[int, float] = {}
    out = []
    for x in range(emp.ground_size):
        v = int(node_of[x])
        if v not in cache:
            cache[v] = ctx.set_merge(int(lay.lo[v]), int(lay.hi[v]))
        delta = float(emp.heights[x]) - cache[v]
        if delta > tol:
            out.append((x, delta))
    return out


def detect_improper_nesting_prose(emp: HeightedClusterTree, tol: float = DEFAULT_TOL) -> list[tuple[int, float]]:
    """Samples whose smallest cluster reaches below their own height.

    Needs no oracle: ``x`` is reported with ``f(x) - m(x, x)`` when that
    exceeds ``tol``.
    """
    diag = emp.cluster_heights[emp.node_of]
    gap = emp.heights - diag
    return [(int(x), float(gap[x])) for x in np.flatnonzero(gap > tol)]


def detect_over_segmentation(
    emp: HeightedClusterTree,
    oracle: HeightedClusterTree,
    snap,
    levels="auto",
    tol: float = DEFAULT_TOL,
    *,
    _ctx: _Context | None = None,
) -> list[tuple[int, float, int, float]]:
    """Oracle components whose sample splits into several empirical clusters.

    Returns ``(oracle node, level, fragments, delta)`` where ``fragments``
    counts the classes of ``A ∩ X_n`` under ``m(a, b) >= level - tol`` and
    ``delta`` is the minimality defect.  Reported when ``fragments >= 2``.
    """
    ctx = _ctx or _Context(emp, oracle, snap)
    out = []
    for comp in _components(ctx.lay, levels):
        delta = max(0.0, comp.level - ctx.set_merge(comp.lo, comp.hi))
        if delta <= tol or comp.hi - comp.lo < 2:
            continue
        frags = ctx.fragments(comp.lo, comp.hi, comp.level - tol)
        if frags >= 2:
            out.append((comp.node, comp.level, frags, delta))
    return out


def _deep_children(lay: _Layout, deep: np.ndarray) -> dict[int, list[int]]:
    """Parent links among deep nodes (ranges form a laminar family)."""
    lo, hi = lay.lo, lay.hi
    order = sorted(deep.tolist(), key=lambda v: (lo[v], -hi[v]))
    kids: dict[int, list[int]] = {int(v): [] for v in deep}
    stack: list[int] = []
    for v in order:
        while stack and hi[stack[-1]] <= lo[v]:
            stack.pop()
        if stack:
            kids[stack[-1]].append(int(v))
        stack.append(int(v))
    return kids


def _sibling_blocks(ctx: _Context, parent: int, kids: list[int]):
    """Sorted sibling ids and the ``k x k`` matrix of maximal emp merge heights between sibling ranges."""
    lay = ctx.lay
    kids = sorted(kids, key=lambda v: lay.lo[v])
    bounds = []
    is_kid = []
    cur = int(lay.lo[parent])
    for v in kids:
        if lay.lo[v] > cur:
            bounds.append(cur)
            is_kid.append(False)
        bounds.append(int(lay.lo[v]))
        is_kid.append(True)
        cur = int(lay.hi[v])
    s, e = int(lay.lo[parent]), int(lay.hi[parent])
    if cur < e:
        bounds.append(cur)
        is_kid.append(False)
    rel = np.array(bounds) - s
    block = ctx.M[s:e, s:e]
    red = np.maximum.reduceat(np.maximum.reduceat(block, rel, axis=0), rel, axis=1)
    sel = np.flatnonzero(is_kid)
    return kids, red[np.ix_(sel, sel)]


def _separation_pairs(ctx: _Context, levels):
    """Yield ``(A node, B node, mu, max cross emp merge height)``."""
    lay = ctx.lay
    ch = lay.oracle.cluster_heights
    if isinstance(levels, str):
        deep = lay.deep_nodes()
        for parent, kids in _deep_children(lay, deep).items():
            if len(kids) < 2:
                continue
            kids, red = _sibling_blocks(ctx, parent, kids)
            mu = float(ch[parent])
            for i in range(len(kids)):
                for j in range(i + 1, len(kids)):
                    yield kids[i], kids[j], mu, float(red[i, j])
        return
    for comps in _group_by_level(_components(lay, levels)):
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                a, b = comps[i], comps[j]
                mu = float(ch[_lca(lay.oracle, a.node, b.node)])
                cross = float(ctx.M[a.lo : a.hi, b.lo : b.hi].max())
                yield a.node, b.node, mu, cross


def _group_by_level(comps):
    groups: dict[float, list[OracleComponent]] = {}
    for c in comps:
        groups.setdefault(c.level, []).append(c)
    return list(groups.values())


def uniform_defects(emp: HeightedClusterTree, oracle: HeightedClusterTree, snap, *, _ctx=None) -> tuple[float, float]:
    """``(uniform minimality defect, uniform separation defect)``.

    The first is the largest minimality defect over all restricted oracle
    components; the second the largest separation defect over all pairs of
    disjoint components.  Each is a single scalar per tree.
    """
    ctx = _ctx or _Context(emp, oracle, snap)
    lay = ctx.lay
    ch = lay.oracle.cluster_heights
    u_min = 0.0
    for v in lay.deep_nodes():
        u_min = max(u_min, float(ch[v]) - ctx.set_merge(int(lay.lo[v]), int(lay.hi[v])))
    u_sep = 0.0
    for _, _, mu, cross in _separation_pairs(ctx, "auto"):
        u_sep = max(u_sep, cross - mu)
    return u_min, u_sep


def uniform_defects_bruteforce(emp: HeightedClusterTree, oracle: HeightedClusterTree, snap) -> tuple[float, float]:
    """Pairwise reference for :func:`uniform_defects`.

    Minimality: ``max (m_f(a, b) - m(a, b))^+`` over all pairs.  Separation:
    ``max (m(a, b) - m_f(a, b))^+`` over pairs that some level separates,
    i.e. ``m_f(a, b) < min(m_f(a, a), m_f(b, b))``.
    """
    snap = np.asarray(snap, dtype=np.intp)
    Mo = merge_height_matrix(oracle, snap)
    Me = merge_height_matrix(emp)
    diag = np.diag(Mo)
    u_min = max(0.0, float((Mo - Me).max()))
    separable = Mo < np.minimum(diag[:, None], diag[None, :])
    u_sep = max(0.0, float((Me - Mo)[separable].max())) if separable.any() else 0.0
    return u_min, u_sep


# -- report ---------------------------------------------------------------------


@dataclass
class ConsistencyReport:
    """All detector outputs for one empirical tree.

    Every list holds only entries whose defect exceeds ``tolerance``; an
    empty list means the corresponding property holds.
    """

    minimality_defects: list = field(default_factory=list)  # (oracle node, level, delta)
    separation_defects: list = field(default_factory=list)  # (A node, B node, mu, delta)
    hartigan_violations: list = field(default_factory=list)  # (A node, B node)
    improper_nesting: list = field(default_factory=list)  # (sample, delta)
    improper_nesting_prose: list = field(default_factory=list)  # (sample, delta)
    over_segmentation: list = field(default_factory=list)  # (oracle node, level, fragments, delta)
    uniform_minimality: float = 0.0
    uniform_separation: float = 0.0
    tolerance: float = DEFAULT_TOL
    levels: object = "auto"

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, val in d.items():
            if isinstance(val, list) and key != "levels":
                d[key] = [list(t) for t in val]
        return d

    @property
    def clean(self) -> bool:
        return not (
            self.minimality_defects
            or self.separation_defects
            or self.hartigan_violations
            or self.improper_nesting
            or self.over_segmentation
        )


def check_consistency(
    emp: HeightedClusterTree,
    oracle: HeightedClusterTree,
    snap,
    levels="auto",
    tol: float = DEFAULT_TOL,
) -> ConsistencyReport:
    """Run every detector.

    Memory is quadratic in the sample size (one empirical merge-height
    matrix), which is fine at desk scale.
    """
    ctx = _Context(emp, oracle, snap)
    lay = ctx.lay
    rep = ConsistencyReport(tolerance=float(tol), levels=levels if isinstance(levels, str) else [float(v) for v in levels])
    for comp in _components(lay, levels):
        delta = max(0.0, comp.level - ctx.set_merge(comp.lo, comp.hi))
        if delta > tol:
            rep.minimality_defects.append((comp.node, comp.level, delta))
    for a, b, mu, cross in _separation_pairs(ctx, levels):
        delta = max(0.0, cross - mu)
        if delta > tol:
            rep.separation_defects.append((a, b, mu, delta))
        if not hartigan_disjoint(emp, lay.members(a), lay.members(b)):
            rep.hartigan_violations.append((a, b))
    rep.improper_nesting = detect_improper_nesting(emp, oracle, snap, tol, _ctx=ctx)
    rep.improper_nesting_prose = detect_improper_nesting_prose(emp, tol)
    rep.over_segmentation = detect_over_segmentation(emp, oracle, snap, levels, tol, _ctx=ctx)
    rep.uniform_minimality, rep.uniform_separation = uniform_defects(emp, oracle, snap, _ctx=ctx)
    return rep


# -- theorem harness ------------------------------------------------------------


class HarnessOutcome(NamedTuple):
    violations: int
    tested: int
    skipped: int


def _random_grid_values(rng, size):
    # a few bumps plus noise, quantized so ties occur
    x = np.linspace(0.0, 1.0, size)
    vals = np.zeros(size)
    for _ in range(rng.integers(1, 5)):
        c = rng.random()
        w = 0.03 + 0.2 * rng.random()
        vals += rng.random() * np.exp(-0.5 * ((x - c) / w) ** 2)
    vals += 0.05 * rng.random(size)
    return np.round(vals * rng.integers(8, 64)) / 8.0


def _random_agglomeration(rng, heights):
    """Random hierarchy: repeatedly merge random groups of current clusters."""
    n = heights.size
    parents: list[int | None] = []
    natives: list[list[int]] = []
    current = []
    for i in range(n):
        parents.append(None)
        natives.append([i])
        current.append(i)
    while len(current) > 1:
        m = int(rng.integers(2, min(4, len(current)) + 1))
        pick = rng.choice(len(current), size=m, replace=False)
        node = len(parents)
        parents.append(None)
        natives.append([])
        for p in sorted(pick.tolist(), reverse=True):
            parents[current[p]] = node
            current.pop(p)
        current.append(node)
    return HeightedClusterTree(parents, natives, heights)


def _perturbed_sweep(rng, heights, scale):
    """Superlevel sweep of a noisy copy of the heights along the line."""
    n = heights.size
    noisy = heights + scale * rng.standard_normal(n)
    edges = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    # drop a few links to create spurious splits
    keep = rng.random(n - 1) > 0.1 * rng.random()
    return sweep_tree(n, superlevel_steps(noisy, edges[keep]), heights)


def theorem_harness_min_sep_implies_hartigan(trials: int, seed: int = 0) -> HarnessOutcome:
    """Check on random instances that minimality plus separation forces disjointness.

    Each trial draws a random 1-D grid density (its oracle tree), a random
    vertex subset as the sample, a random empirical tree on the sample with
    true heights, and two disjoint oracle components ``A``, ``A'`` at a
    random level ``lam`` merging at ``mu``.  With ``d_m`` the larger of the
    two minimality defects and ``d_s`` the separation defect, the pair meets
    the hypothesis when some ``0 < d < lam - mu`` has both sets connected
    and separated at ``mu + d``, i.e. ``d_s < lam - mu - d_m``.  Those pairs
    must be disjoint in the Hartigan sense; any that are not is a violation.
    """
    from .oracle import GridDensity, grid_cluster_tree

    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    violations = tested = skipped = 0
    for _ in range(trials):
        size = int(rng.integers(20, 120))
        vals = _random_grid_values(rng, size)
        oracle = grid_cluster_tree(GridDensity(((0.0, 1.0),), (size,), vals))
        m = int(rng.integers(5, size + 1))
        sample = np.sort(rng.choice(size, size=m, replace=False))
        heights = vals[sample]
        kind = rng.integers(3)
        if kind == 0:
            emp = _random_agglomeration(rng, heights)
        else:
            emp = _perturbed_sweep(rng, heights, scale=[0.0, 0.02, 0.2][int(rng.integers(3))])
        lay = _Layout(oracle, sample, m)
        levels = np.unique(vals)
        lam = float(rng.choice(levels))
        comps = [v for v in alive_nodes(oracle, lam) if lay.count[v]]
        if len(comps) < 2:
            skipped += 1
            continue
        i, j = rng.choice(len(comps), size=2, replace=False)
        outcome = min_sep_case(emp, oracle, sample, comps[i], comps[j], lam, _lay=lay)
        if outcome is None:
            skipped += 1
            continue
        tested += 1
        if not outcome:
            violations += 1
    return HarnessOutcome(violations, tested, skipped)


def min_sep_case(emp, oracle, snap, a_node: int, b_node: int, lam: float, *, _lay=None) -> bool | None:
    """One harness case: ``None`` when the pair falls outside the hypothesis,
    otherwise whether the smallest empirical clusters are disjoint.

    ``a_node`` and ``b_node`` are disjoint oracle components at level ``lam``.
    """
    lay = _lay or _Layout(oracle, snap, emp.ground_size)
    A, B = lay.members(a_node), lay.members(b_node)
    if A.size == 0 or B.size == 0:
        return None
    mu = float(oracle.cluster_heights[_lca(oracle, a_node, b_node)])
    d_m = max(minimality_defect(emp, A, lam), minimality_defect(emp, B, lam))
    d_s = separation_defect(emp, A, B, mu)
    if not (lam > mu and d_s < lam - mu - d_m):
        return None
    return hartigan_disjoint(emp, A, B)


# -- covering radius --------------------------------------------------------------


def epsilon_sample_radius(samples, region, grid=None) -> float:
    """Largest distance from a region point to its nearest sample.

    ``region`` is an array of coordinates, or of vertex indices when ``grid``
    is given.
    """
    S = as_points(samples)
    if grid is not None:
        idx = np.asarray(region, dtype=np.intp).reshape(-1)
        if idx.size == 0:
            raise ValueError("region must be nonempty")
        R = grid.vertex_coords(idx)
    else:
        R = as_points(region) if np.size(region) else np.zeros((0, S.shape[1]))
        if R.shape[0] == 0:
            raise ValueError("region must be nonempty")
    _, nearest = cKDTree(S).query(R, k=1)
    # re-measure with the package distance so exact coincidences give exactly 0
    return float(max(distances_from(S[j : j + 1], r)[0] for r, j in zip(R, nearest)))
