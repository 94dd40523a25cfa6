"""Convergence experiments: estimate trees on nested samples and compare them
with the grid oracle."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .density import knn_density
from .io import ValidationError, model_from_dict, load_model, save_tree
from .metric import consecutive_distance, merge_distortion, snap_correspondence
from .oracle import DensityModel, eval_density, grid_cluster_tree, make_grid, parse_grid_spec, sample, snap_to_grid
from .rsl import filtration_to_tree, rsl_filtration
from .split_tree import split_cluster_tree

__all__ = [
    "Schedule",
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentReport",
    "load_config",
    "run_experiment",
    "worker_count",
]

CSV_HEADER = "n,seed,d_true,d_est,d_consecutive"
DETAIL_HEADER = "n,seed,sup_abs_error,k,param"


@dataclass(frozen=True)
class Schedule:
    """A parameter as a function of ``n`` (and dimension ``d``).

    Forms: ``const`` (``value``), ``log2`` (``ceil(c log(n)^2)``), ``sqrt``
    (``ceil(c sqrt(n))``), ``logn_over_n`` (``c (log(n) / n)^(1/d)``).
    """

    form: str
    c: float = 1.0
    value: float | None = None

    def __post_init__(self):
        if self.form not in ("const", "log2", "sqrt", "logn_over_n"):
            raise ValueError(f"unknown schedule form {self.form!r}")
        if self.form == "const":
            if self.value is None or not self.value > 0:
                raise ValueError("a const schedule needs a positive value")
        elif not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"schedule constant must be positive, got {self.c!r}")

    def __call__(self, n: int, d: int = 1) -> float:
        if self.form == "const":
            return float(self.value)
        if self.form == "log2":
            return float(math.ceil(self.c * math.log(n) ** 2))
        if self.form == "sqrt":
            return float(math.ceil(self.c * math.sqrt(n)))
        return self.c * (math.log(n) / n) ** (1.0 / d)

    def k(self, n: int, d: int = 1) -> int:
        return int(min(max(1, round(self(n, d))), n))

    @classmethod
    def from_dict(cls, data, where: str) -> "Schedule":
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            data = {"form": "const", "value": data}
        if not isinstance(data, dict) or "form" not in data:
            raise ValidationError("expected a number or {'form': ..., 'c': ...}", where)
        try:
            return cls(str(data["form"]), float(data.get("c", 1.0)), data.get("value"))
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc), where) from None

    def to_dict(self) -> dict:
        return {"form": self.form, "value": self.value} if self.form == "const" else {"form": self.form, "c": self.c}


@dataclass(frozen=True)
class ExperimentConfig:
    model: DensityModel
    estimator: str
    sizes: tuple
    seeds: tuple
    grid: str
    output_dir: str | None = None
    k: Schedule = field(default_factory=lambda: Schedule("log2", 2.0))
    alpha: float = math.sqrt(2.0)
    r: Schedule = field(default_factory=lambda: Schedule("logn_over_n", 1.0))
    density_k: Schedule = field(default_factory=lambda: Schedule("sqrt", 1.0))
    save_trees: bool = True

    def __post_init__(self):
        if self.estimator not in ("rsl", "split_tree"):
            raise ValidationError(f"must be 'rsl' or 'split_tree', got {self.estimator!r}", "config.estimator")
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(n < 2 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError("must be a nonempty strictly increasing list of integers >= 2", "config.sizes")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ValidationError("need at least one seed", "config.seeds")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValidationError("must be positive", "config.alpha")
        try:
            parse_grid_spec(self.grid)
        except ValueError as exc:
            raise ValidationError(str(exc), "config.grid") from None
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "seeds", seeds)


def load_config(data: dict, base_dir: Path | None = None, **overrides) -> ExperimentConfig:
    """Build a config from parsed JSON; keyword overrides replace fields."""
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object", "config")
    data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    for key in ("model", "estimator", "sizes", "seeds", "grid"):
        if key not in data:
            raise ValidationError("missing field", f"config.{key}")
    model = data["model"]
    if isinstance(model, str):
        path = Path(model)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        model = load_model(path)
    elif isinstance(model, dict):
        model = model_from_dict(model, "config.model")
    elif not isinstance(model, DensityModel):
        raise ValidationError("must be a model object or a path", "config.model")
    kwargs = {}
    for key in ("k", "r", "density_k"):
        if key in data:
            kwargs[key] = Schedule.from_dict(data[key], f"config.{key}")
    if "alpha" in data:
        try:
            kwargs["alpha"] = float(data["alpha"])
        except (TypeError, ValueError):
            raise ValidationError(f"not a number: {data['alpha']!r}", "config.alpha") from None
    for key in ("sizes", "seeds"):
        if not isinstance(data[key], list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in data[key]):
            raise ValidationError("must be a list of integers", f"config.{key}")
    return ExperimentConfig(
        model=model,
        estimator=data["estimator"],
        sizes=tuple(data["sizes"]),
        seeds=tuple(data["seeds"]),
        grid=str(data["grid"]),
        output_dir=data.get("output_dir"),
        save_trees=bool(data.get("save_trees", True)),
        **kwargs,
    )


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    seed: int
    d_true: float
    d_est: float
    d_consecutive: float | None
    sup_abs_error: float
    k: int
    param: float

    def csv(self) -> str:
        cons = "" if self.d_consecutive is None else repr(self.d_consecutive)
        return f"{self.n},{self.seed},{self.d_true!r},{self.d_est!r},{cons}"

    def detail_csv(self) -> str:
        return f"{self.n},{self.seed},{self.sup_abs_error!r},{self.k},{self.param!r}"


@dataclass
class ExperimentReport:
    rows: list
    csv_path: Path | None = None
    detail_path: Path | None = None

    def csv_text(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"

    def detail_text(self) -> str:
        return "\n".join([DETAIL_HEADER] + [r.detail_csv() for r in self.rows]) + "\n"

    def median(self, column: str, n: int) -> float:
        return float(np.median([getattr(r, column) for r in self.rows if r.n == n]))


def worker_count(jobs: int) -> int:
    """Workers for ``jobs`` cells, capped by ``MERGETREE_THREADS``."""
    env = os.environ.get("MERGETREE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ValidationError(f"not an integer: {env!r}", "MERGETREE_THREADS") from None
    return max(1, min(cap, jobs))


def _oracle(cfg: ExperimentConfig):
    box, res = parse_grid_spec(cfg.grid)
    grid = make_grid(cfg.model, box, res)
    return grid, grid_cluster_tree(grid)


def _run_seed(cfg: ExperimentConfig, seed: int, tree_dir: str | None):
    grid, oracle = _oracle(cfg)
    cloud = sample(cfg.model, cfg.sizes[-1], seed).points
    d = cloud.shape[1]
    rows = []
    prev = None
    log_lines = []
    for n in cfg.sizes:
        t0 = time.perf_counter()
        X = cloud[:n]
        f_true = np.asarray(eval_density(cfg.model, X), dtype=np.float64).reshape(-1)
        f_est = knn_density(X, cfg.density_k.k(n, d))
        if cfg.estimator == "rsl":
            k = cfg.k.k(n, d)
            param = cfg.alpha
            shape = filtration_to_tree(rsl_filtration(X, k, cfg.alpha, edges="spanning"), f_true)
        else:
            k = cfg.density_k.k(n, d)
            param = cfg.r(n, d)
            shape = split_cluster_tree(X, f_est, param)
        t_true = shape.with_heights(f_true)
        t_est = shape.with_heights(f_est)
        snap = snap_to_grid(X, grid)
        gamma = snap_correspondence(snap)
        d_true = merge_distortion(t_true, oracle, gamma)
        d_est = merge_distortion(t_est, oracle, gamma)
        d_cons = consecutive_distance(prev, t_est) if prev is not None else None
        sup_err = float(np.max(np.abs(f_true - f_est)))
        rows.append(ExperimentRow(n, seed, d_true, d_est, d_cons, sup_err, int(k), float(param)))
        if tree_dir is not None:
            save_tree(t_true, Path(tree_dir) / f"n{n}_seed{seed}_true.json")
            save_tree(t_est, Path(tree_dir) / f"n{n}_seed{seed}_est.json")
        prev = t_est
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        log_lines.append(f"{stamp} n={n} seed={seed} seconds={time.perf_counter() - t0:.3f}")
    return rows, log_lines


def run_experiment(cfg: ExperimentConfig, output_dir=None, *, workers: int | None = None) -> ExperimentReport:
    """Run every (n, seed) cell and write ``report.csv`` (plus ``details.csv``,
    per-run trees and a timestamped ``run.log``) when an output directory is set.

    Seeds run in parallel; rows are sorted by ``(n, seed)`` before writing so
    the CSVs do not depend on scheduling.
    """
    out = Path(output_dir or cfg.output_dir) if (output_dir or cfg.output_dir) else None
    tree_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.save_trees:
            tree_dir = out / "trees"
            tree_dir.mkdir(exist_ok=True)
    nworkers = workers or worker_count(len(cfg.seeds))
    tree_arg = str(tree_dir) if tree_dir else None
    results = []
    if nworkers == 1:
        results = [_run_seed(cfg, s, tree_arg) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            futures = [pool.submit(_run_seed, cfg, s, tree_arg) for s in cfg.seeds]
            results = [f.result() for f in futures]
    rows = sorted((r for rs, _ in results for r in rs), key=lambda r: (r.n, r.seed))
    report = ExperimentReport(rows)
    if out is not None:
        if tree_dir is not None:
            grid, oracle = _oracle(cfg)
            save_tree(oracle, tree_dir / "oracle.json")
        report.csv_path = out / "report.csv"
        report.detail_path = out / "details.csv"
        report.csv_path.write_text(report.csv_text())
        report.detail_path.write_text(report.detail_text())
        with open(out / "run.log", "a") as fh:
            for _, lines in results:
                fh.writelines(line + "\n" for line in lines)
    return report
