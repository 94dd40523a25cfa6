"""Synthetic densities and the brute-force ground-truth cluster tree on a grid."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .tree import HeightedClusterTree, LevelSetComponent, PointCloud, as_points, superlevel_steps, sweep_tree

__all__ = [
    "DensityModel",
    "GridDensity",
    "gaussian_mixture",
    "piecewise_linear",
    "eval_density",
    "sample",
    "make_grid",
    "parse_grid_spec",
    "grid_cluster_tree",
    "brute_force_level_components",
    "snap_to_grid",
]

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class DensityModel:
    """A concrete density ``f``.

    ``kind`` is ``"gaussian_mixture"`` (``components`` holds
    ``(weight, mean, std)`` triples with diagonal stds) or
    ``"piecewise_linear_1d"`` (``breakpoints`` holds ``(x, value)`` pairs,
    zero outside the first and last breakpoint).
    """

    kind: str
    components: tuple = ()
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind == "gaussian_mixture":
            if not self.components:
                raise ValueError("a mixture needs at least one component")
            comps = []
            dim = None
            for w, mean, std in self.components:
                mean = tuple(float(v) for v in np.atleast_1d(mean))
                std = tuple(float(v) for v in np.atleast_1d(std))
                if dim is None:
                    dim = len(mean)
                if len(mean) != dim or len(std) != dim:
                    raise ValueError("all components must share one dimension")
                if w < 0 or not math.isfinite(w):
                    raise ValueError(f"invalid weight {w!r}")
                if any(s <= 0 or not math.isfinite(s) for s in std):
                    raise ValueError(f"stds must be positive, got {std}")
                comps.append((float(w), mean, std))
            total = sum(c[0] for c in comps)
            if abs(total - 1.0) > _WEIGHT_TOL:
                raise ValueError(f"weights must sum to 1, got {total!r}")
            object.__setattr__(self, "components", tuple(comps))
        elif self.kind == "piecewise_linear_1d":
            bps = tuple((float(x), float(y)) for x, y in self.breakpoints)
            if len(bps) < 2:
                raise ValueError("need at least two breakpoints")
            xs = [b[0] for b in bps]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("breakpoint x values must be strictly increasing")
            if any(y < 0 or not math.isfinite(y) for _, y in bps):
                raise ValueError("breakpoint values must be finite and non-negative")
            mass = sum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(bps, bps[1:]))
            if abs(mass - 1.0) > 1e-12:
                raise ValueError(f"piecewise-linear density integrates to {mass!r}, not 1")
            object.__setattr__(self, "breakpoints", bps)
        else:
            raise ValueError(f"unknown density kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return len(self.components[0][1]) if self.kind == "gaussian_mixture" else 1

    def lipschitz_constant(self) -> float:
        """An upper bound on the Lipschitz constant (exact for one 1-D Gaussian
        and for piecewise-linear models)."""
        if self.kind == "piecewise_linear_1d":
            bps = self.breakpoints
            slopes = [abs(y1 - y0) / (x1 - x0) for (x0, y0), (x1, y1) in zip(bps, bps[1:])]
            # the jump to zero outside the support is not Lipschitz
            if bps[0][1] > 0 or bps[-1][1] > 0:
                return math.inf
            return max(slopes)
        # |grad N(x)| <= N_max * |z| e^{-|z|^2/2} / s_min <= N_max e^{-1/2} / s_min
        total = 0.0
        d = self.dim
        for w, _, std in self.components:
            peak = 1.0 / ((2 * math.pi) ** (d / 2) * math.prod(std))
            total += w * peak * math.exp(-0.5) / min(std)
        return total


def gaussian_mixture(weights, means, stds) -> DensityModel:
    return DensityModel("gaussian_mixture", tuple(zip(weights, means, stds)))


def piecewise_linear(xs, ys, *, normalize: bool = True) -> DensityModel:
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    if normalize:
        mass = sum((x1 - x0) * (y0 + y1) / 2 for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:]))
        if mass <= 0:
            raise ValueError("density has zero mass")
        ys = [y / mass for y in ys]
    return DensityModel("piecewise_linear_1d", breakpoints=tuple(zip(xs, ys)))


def eval_density(model: DensityModel, x) -> np.ndarray | float:
    """Evaluate ``f`` at one point (shape ``(d,)``) or many (shape ``(m, d)``)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim <= 1 and (model.dim > 1 or arr.ndim == 0)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if model.dim > 1 else arr.reshape(-1, 1)
    if arr.shape[1] != model.dim:
        raise ValueError(f"expected points of dimension {model.dim}, got {arr.shape[1]}")
    if model.kind == "piecewise_linear_1d":
        bx = np.array([b[0] for b in model.breakpoints])
        by = np.array([b[1] for b in model.breakpoints])
        out = np.interp(arr[:, 0], bx, by, left=0.0, right=0.0)
    else:
        out = np.zeros(arr.shape[0])
        d = model.dim
        for w, mean, std in model.components:
            mean = np.asarray(mean)
            std = np.asarray(std)
            z = (arr - mean) / std
            norm = (2 * math.pi) ** (d / 2) * float(np.prod(std))
            out += w * np.exp(-0.5 * (z * z).sum(axis=1)) / norm
    return float(out[0]) if single else out


def sample(model: DensityModel, n: int, seed: int) -> PointCloud:
    """Draw ``n`` i.i.d. points.

    Draws use separate generator streams for the component choice and the
    Gaussian noise, consumed in point order, so the first ``m`` points of a size-``n``
    sample equal the size-``m`` sample for the same seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ss = np.random.SeedSequence(seed)
    label_rng, noise_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    u = label_rng.random(n)
    if model.kind == "gaussian_mixture":
        d = model.dim
        z = noise_rng.standard_normal((n, d))
        weights = np.array([c[0] for c in model.components])
        cum = np.cumsum(weights)
        cum[-1] = 1.0
        labels = np.searchsorted(cum, u, side="right")
        labels = np.minimum(labels, len(weights) - 1)
        means = np.array([c[1] for c in model.components])
        stds = np.array([c[2] for c in model.components])
        return PointCloud(means[labels] + stds[labels] * z)
    # inverse CDF of a piecewise-linear density, one uniform per point
    bps = model.breakpoints
    xs = np.array([b[0] for b in bps])
    ys = np.array([b[1] for b in bps])
    widths = np.diff(xs)
    masses = widths * (ys[:-1] + ys[1:]) / 2
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    target = u * cum[-1]
    nonempty = np.flatnonzero(masses > 0)
    seg = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(masses) - 1)
    # a zero-mass segment can only be hit on its boundary; use the next one with mass
    seg = nonempty[np.minimum(np.searchsorted(nonempty, seg), nonempty.size - 1)]
    m = np.clip(target - cum[seg], 0.0, masses[seg])
    y0 = ys[seg]
    w = widths[seg]
    a = (ys[seg + 1] - y0) / (2 * w)
    disc = np.sqrt(np.maximum(y0 * y0 + 4 * a * m, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(y0 + disc > 0, 2 * m / (y0 + disc), 0.0)
    s = np.clip(s, 0.0, w)
    return PointCloud(xs[seg] + s)


@dataclass(frozen=True)
class GridDensity:
    """Density values on a regular 1-D or 2-D grid with axis-neighbour adjacency.

    Vertices are indexed in C order over ``resolution`` (axis 0 slowest).
    """

    box: tuple
    resolution: tuple
    values: np.ndarray

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        res = tuple(int(r) for r in self.resolution)
        if len(box) != len(res) or len(res) not in (1, 2):
            raise ValueError("grids must be 1-D or 2-D with one (lo, hi) per axis")
        if any(r < 2 for r in res):
            raise ValueError("resolution must be >= 2 per axis")
        if any(not hi > lo for lo, hi in box):
            raise ValueError("box axes need lo < hi")
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.size != math.prod(res):
            raise ValueError(f"expected {math.prod(res)} values, got {vals.size}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("grid values must be finite and non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def n_vertices(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (r - 1) for (lo, hi), r in zip(self.box, self.resolution)])

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, r) for (lo, hi), r in zip(self.box, self.resolution)]

    def vertex_coords(self, idx=None) -> np.ndarray:
        axes = self.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return coords if idx is None else coords[np.asarray(idx)]

    def edges(self) -> np.ndarray:
        """Axis-neighbour edges ``(u, v)`` with ``u < v``."""
        ids = np.arange(self.n_vertices).reshape(self.resolution)
        parts = []
        for axis in range(self.dim):
            lo = np.take(ids, np.arange(ids.shape[axis] - 1), axis=axis).reshape(-1)
            hi = np.take(ids, np.arange(1, ids.shape[axis]), axis=axis).reshape(-1)
            parts.append(np.stack([lo, hi], axis=1))
        return np.concatenate(parts)


def make_grid(model: DensityModel, box: Sequence, resolution: Sequence) -> GridDensity:
    """Tabulate ``model`` at the vertices of a regular grid."""
    box = tuple(tuple(b) for b in box)
    grid = GridDensity(box, tuple(resolution), np.zeros(math.prod(resolution)))
    if model.dim != grid.dim:
        raise ValueError(f"model is {model.dim}-D but grid is {grid.dim}-D")
    return GridDensity(box, grid.resolution, eval_density(model, grid.vertex_coords()))


def parse_grid_spec(spec: str) -> tuple[tuple, tuple]:
    """``"lo,hi,res[;lo,hi,res]"`` -> ``(box, resolution)``."""
    box, res = [], []
    for part in spec.split(";"):
        fields = [p.strip() for p in part.split(",")]
        if len(fields) != 3:
            raise ValueError(f"grid axis must be 'lo,hi,res', got {part!r}")
        lo, hi = float(fields[0]), float(fields[1])
        r = int(fields[2])
        box.append((lo, hi))
        res.append(r)
    return tuple(box), tuple(res)


def grid_cluster_tree(grid: GridDensity) -> HeightedClusterTree:
    """Density cluster tree of the grid function, by a descending union-find sweep.

    Levels are exactly the distinct grid values.  Equal values are one step;
    inside a step vertices activate by index and edges union in
    lexicographic order.
    """
    return sweep_tree(grid.n_vertices, superlevel_steps(grid.values, grid.edges()), grid.values)


def brute_force_level_components(grid: GridDensity, level: float) -> list[LevelSetComponent]:
    """Flood-fill components of ``{v : f(v) >= level}`` (the reference oracle)."""
    mask = (grid.values >= level).reshape(grid.resolution)
    structure = ndimage.generate_binary_structure(grid.dim, 1)
    labels, count = ndimage.label(mask, structure=structure)
    flat = labels.reshape(-1)
    comps = []
    for lab in range(1, count + 1):
        members = np.flatnonzero(flat == lab)
        comps.append(LevelSetComponent(float(level), frozenset(members.tolist()), lab - 1))
    return comps


def snap_to_grid(points, grid: GridDensity) -> np.ndarray:
    """Nearest grid vertex of each point; ties go to the smaller vertex index."""
    X = as_points(points)
    if X.shape[1] != grid.dim:
        raise ValueError(f"points are {X.shape[1]}-D but grid is {grid.dim}-D")
    lo = np.array([b[0] for b in grid.box])
    hi = np.array([b[1] for b in grid.box])
    outside = np.flatnonzero(np.any((X < lo) | (X > hi), axis=1))
    if outside.size:
        raise ValueError(f"points outside the grid box at rows {outside[:10].tolist()}")
    res = np.array(grid.resolution)
    t = (X - lo) / grid.spacing
    # ceil(t - 1/2) rounds half down, i.e. ties to the lower vertex
    axis_idx = np.clip(np.ceil(t - 0.5).astype(np.intp), 0, res - 1)
    return np.ravel_multi_index(tuple(axis_idx.T), grid.resolution)
