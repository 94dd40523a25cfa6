"""``mergetree`` command line.

Exit status: 0 on success, 1 on invalid input, 2 on I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .density import knn_density
from .diagnostics import DEFAULT_TOL, check_consistency
from .experiment import load_config, run_experiment
from .metric import Correspondence, identity_correspondence, merge_distortion
from .oracle import eval_density, grid_cluster_tree, make_grid, parse_grid_spec, sample, snap_to_grid
from .rsl import filtration_to_tree, rsl_filtration
from .split_tree import split_cluster_tree
from .tree import validate

log = logging.getLogger("mergetree")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _strict_flag(p):
    p.add_argument(
        "--strict",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="refuse trees that violate the cluster-tree invariants (default); --no-strict only warns",
    )


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mergetree", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw points from a density model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate-density", help="kNN density at every point")
    p.add_argument("--points", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle-tree", help="grid density cluster tree of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True, help='"lo,hi,res[;lo,hi,res]"')
    p.add_argument("--out", required=True)

    p = sub.add_parser("snap", help="nearest grid vertex of every point")
    p.add_argument("--points", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("rsl", help="robust single linkage tree")
    p.add_argument("--points", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=2**0.5)
    p.add_argument("--heights", required=True, help="true:model.json | knn:K | file:h.csv")
    p.add_argument("--edges", choices=("spanning", "all"), default="spanning")
    p.add_argument("--out", required=True)

    p = sub.add_parser("split-tree", help="split-cluster tree")
    p.add_argument("--points", required=True)
    p.add_argument("--density", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("distortion", help="merge distortion between two trees")
    p.add_argument("--tree-a", required=True)
    p.add_argument("--tree-b", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--correspondence")
    g.add_argument("--identity", action="store_true")
    _strict_flag(p)

    p = sub.add_parser("check", help="consistency report of an empirical tree against the oracle")
    p.add_argument("--emp", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--snap", required=True)
    p.add_argument("--levels", default="auto", help='"auto" or comma-separated levels')
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", required=True)
    _strict_flag(p)

    p = sub.add_parser("experiment", help="convergence experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--estimator", choices=("rsl", "split_tree"))
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--grid")
    p.add_argument("--alpha", type=float)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("validate", help="report cluster-tree invariant violations")
    p.add_argument("--tree", required=True)
    return ap


def _int_list(text):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise io.ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _heights(spec: str, X: np.ndarray) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    if kind == "true" and arg:
        return np.asarray(eval_density(io.load_model(arg), X), dtype=np.float64).reshape(-1)
    if kind == "knn" and arg:
        try:
            k = int(arg)
        except ValueError:
            raise io.ValidationError(f"knn needs an integer k, got {arg!r}", "--heights") from None
        return knn_density(X, k)
    if kind == "file" and arg:
        return io.read_vector(arg, expected=X.shape[0])
    raise io.ValidationError(f"expected true:model.json, knn:K or file:h.csv, got {spec!r}", "--heights")


def _run(args) -> int:
    cmd = args.command
    if cmd == "sample":
        cloud = sample(io.load_model(args.model), args.n, args.seed)
        io.write_points(cloud.points, args.out)
    elif cmd == "estimate-density":
        io.write_vector(knn_density(io.read_points(args.points), args.k), args.out)
    elif cmd == "oracle-tree":
        box, res = parse_grid_spec(args.grid)
        io.save_tree(grid_cluster_tree(make_grid(io.load_model(args.model), box, res)), args.out)
    elif cmd == "snap":
        box, res = parse_grid_spec(args.grid)
        from .oracle import GridDensity

        grid = GridDensity(box, res, np.zeros(int(np.prod(res))))
        io.write_vector(snap_to_grid(io.read_points(args.points), grid), args.out)
    elif cmd == "rsl":
        X = io.read_points(args.points)
        h = _heights(args.heights, X)
        filt = rsl_filtration(X, args.k, args.alpha, edges=args.edges)
        io.save_tree(filtration_to_tree(filt, h), args.out)
        if filt.isolated_at_max_r:
            log.warning("isolated at max r: %s", list(filt.isolated_at_max_r)[:20])
    elif cmd == "split-tree":
        X = io.read_points(args.points)
        dens = io.read_vector(args.density, expected=X.shape[0])
        io.save_tree(split_cluster_tree(X, dens, args.r), args.out)
    elif cmd == "distortion":
        a = io.load_tree(args.tree_a, strict=args.strict)
        b = io.load_tree(args.tree_b, strict=args.strict)
        if args.identity:
            if a.ground_size != b.ground_size:
                raise io.ValidationError("--identity needs trees over the same ground set")
            gamma: Correspondence = identity_correspondence(a.ground_size)
        else:
            gamma = io.load_correspondence(args.correspondence)
        print(f"{merge_distortion(a, b, gamma):.12g}")
    elif cmd == "check":
        emp = io.load_tree(args.emp, strict=args.strict)
        oracle = io.load_tree(args.oracle, strict=args.strict)
        snap = io.read_index_vector(args.snap, expected=emp.ground_size)
        levels = args.levels
        if levels != "auto":
            try:
                levels = [float(v) for v in levels.split(",") if v.strip()]
            except ValueError:
                raise io.ValidationError(f"expected 'auto' or numbers, got {args.levels!r}", "--levels") from None
        report = check_consistency(emp, oracle, snap, levels, args.tol)
        io.save_json(report.to_dict(), args.out)
    elif cmd == "experiment":
        path = Path(args.config)
        data = json.loads(path.read_text())
        cfg = load_config(
            data,
            base_dir=path.parent,
            estimator=args.estimator,
            sizes=_int_list(args.sizes),
            seeds=_int_list(args.seeds),
            grid=args.grid,
            alpha=args.alpha,
        )
        report = run_experiment(cfg, args.out_dir, workers=args.workers)
        print(report.csv_path if report.csv_path else report.csv_text(), end="\n" if report.csv_path else "")
    elif cmd == "validate":
        tree = io.load_tree(args.tree, strict=False)
        problems = validate(tree)
        for v in problems:
            print(v)
        if problems:
            return EXIT_INVALID
        print("ok")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except (io.ValidationError, ValueError, KeyError, IndexError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
