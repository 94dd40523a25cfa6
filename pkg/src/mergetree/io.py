"""Flat-file formats: JSON trees, models, correspondences and reports; CSV arrays.

Floats are written with ``repr`` so every round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .metric import Correspondence
from .oracle import DensityModel
from .tree import HeightedClusterTree, validate

__all__ = [
    "ValidationError",
    "SCHEMA_VERSION",
    "tree_to_dict",
    "tree_from_dict",
    "save_tree",
    "load_tree",
    "read_points",
    "write_points",
    "read_vector",
    "write_vector",
    "read_index_vector",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
    "correspondence_from_dict",
    "load_correspondence",
    "save_json",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    """Malformed input; ``where`` names the file, row or field at fault."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


# -- trees ------------------------------------------------------------------------


def tree_to_dict(tree: HeightedClusterTree) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "ground_size": tree.ground_size,
        "heights": [float(h) for h in tree.heights],
        "nodes": [
            {"id": i, "parent": p, "native_members": [int(x) for x in tree.native_members[i]]}
            for i, p in enumerate(tree.parents)
        ],
    }


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"missing field {key!r}", where)
    return obj[key]


def tree_from_dict(data: dict, *, strict: bool = True, source: str = "tree") -> HeightedClusterTree:
    """Parse the tree schema.

    With ``strict`` any invariant violation raises :class:`ValidationError`;
    otherwise violations are logged as warnings and the tree is returned.
    """
    version = data.get("schema_version", SCHEMA_VERSION) if isinstance(data, dict) else None
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version!r}", source)
    n = _field(data, "ground_size", source)
    heights = _field(data, "heights", source)
    nodes = _field(data, "nodes", source)
    if not isinstance(n, int) or n < 0:
        raise ValidationError(f"ground_size must be a non-negative integer, got {n!r}", source)
    if not isinstance(heights, list) or len(heights) != n:
        raise ValidationError(f"heights must be a list of {n} numbers", f"{source}.heights")
    for i, h in enumerate(heights):
        if isinstance(h, bool) or not isinstance(h, (int, float)):
            raise ValidationError(f"height is not a number: {h!r}", f"{source}.heights[{i}]")
    if not isinstance(nodes, list):
        raise ValidationError("nodes must be a list", f"{source}.nodes")
    m = len(nodes)
    parents: list = [None] * m
    natives: list = [None] * m
    for pos, node in enumerate(nodes):
        where = f"{source}.nodes[{pos}]"
        nid = _field(node, "id", where)
        parent = _field(node, "parent", where)
        members = _field(node, "native_members", where)
        if not isinstance(nid, int) or not 0 <= nid < m:
            raise ValidationError(f"node ids must be dense 0..{m - 1}, got {nid!r}", where)
        if natives[nid] is not None:
            raise ValidationError(f"duplicate node id {nid}", where)
        if parent is not None and not isinstance(parent, int):
            raise ValidationError(f"parent must be an integer or null, got {parent!r}", where)
        if not isinstance(members, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in members):
            raise ValidationError("native_members must be a list of integers", where)
        parents[nid] = parent
        natives[nid] = members
    tree = HeightedClusterTree(parents, natives, [float(h) for h in heights])
    problems = validate(tree)
    if problems:
        if strict:
            raise ValidationError("; ".join(str(v) for v in problems), source)
        for v in problems:
            log.warning("%s: %s", source, v)
    return tree


def save_tree(tree: HeightedClusterTree, path) -> None:
    save_json(tree_to_dict(tree), path)


def load_tree(path, *, strict: bool = True) -> HeightedClusterTree:
    return tree_from_dict(_load_json(path), strict=strict, source=str(path))


# -- JSON helpers ------------------------------------------------------------------


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg}) at line {exc.lineno} column {exc.colno}", str(path)) from None


def save_json(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


# -- CSV arrays --------------------------------------------------------------------


def _read_rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            yield lineno, row


def _float(cell: str, where: str) -> float:
    try:
        val = float(cell)
    except ValueError:
        raise ValidationError(f"not a number: {cell!r}", where) from None
    if not math.isfinite(val):
        raise ValidationError(f"non-finite value {cell!r}", where)
    return val


def read_points(path) -> np.ndarray:
    """One point per row, comma separated, no header."""
    rows = []
    width = None
    for lineno, row in _read_rows(path):
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ValidationError(f"expected {width} columns, found {len(row)}", f"{path}: row {lineno}")
        rows.append([_float(c, f"{path}: row {lineno}") for c in row])
    if not rows:
        raise ValidationError("no points", str(path))
    return np.array(rows, dtype=np.float64)


def write_points(points, path) -> None:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    with open(path, "w") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_vector(path, expected: int | None = None) -> np.ndarray:
    """One number per row."""
    vals = []
    for lineno, row in _read_rows(path):
        if len(row) != 1:
            raise ValidationError(f"expected 1 column, found {len(row)}", f"{path}: row {lineno}")
        vals.append(_float(row[0], f"{path}: row {lineno}"))
    if expected is not None and len(vals) != expected:
        raise ValidationError(f"expected {expected} rows, found {len(vals)}", str(path))
    return np.array(vals, dtype=np.float64)


def read_index_vector(path, expected: int | None = None) -> np.ndarray:
    vals = []
    for lineno, row in _read_rows(path):
        if len(row) != 1:
            raise ValidationError(f"expected 1 column, found {len(row)}", f"{path}: row {lineno}")
        try:
            vals.append(int(row[0]))
        except ValueError:
            raise ValidationError(f"not an integer: {row[0]!r}", f"{path}: row {lineno}") from None
    if expected is not None and len(vals) != expected:
        raise ValidationError(f"expected {expected} rows, found {len(vals)}", str(path))
    return np.array(vals, dtype=np.intp)


def write_vector(values, path) -> None:
    arr = np.asarray(values).reshape(-1)
    fmt = (lambda v: repr(float(v))) if np.issubdtype(arr.dtype, np.floating) else (lambda v: str(int(v)))
    with open(path, "w") as fh:
        fh.writelines(fmt(v) + "\n" for v in arr)


# -- models ------------------------------------------------------------------------


def model_from_dict(data: dict, source: str = "model") -> DensityModel:
    kind = _field(data, "kind", source)
    try:
        if kind == "gaussian_mixture":
            comps = _field(data, "components", source)
            triples = []
            for i, c in enumerate(comps):
                where = f"{source}.components[{i}]"
                triples.append((_field(c, "w", where), _field(c, "mean", where), _field(c, "std", where)))
            return DensityModel("gaussian_mixture", tuple(triples))
        if kind == "piecewise_linear_1d":
            bps = _field(data, "breakpoints", source)
            if data.get("normalize", False):
                from .oracle import piecewise_linear

                return piecewise_linear([b[0] for b in bps], [b[1] for b in bps])
            return DensityModel("piecewise_linear_1d", breakpoints=tuple(tuple(b) for b in bps))
    except ValidationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ValidationError(str(exc), source) from None
    raise ValidationError(f"unknown kind {kind!r}", f"{source}.kind")


def model_to_dict(model: DensityModel) -> dict:
    if model.kind == "gaussian_mixture":
        return {
            "kind": model.kind,
            "components": [{"w": w, "mean": list(m), "std": list(s)} for w, m, s in model.components],
        }
    return {"kind": model.kind, "breakpoints": [list(b) for b in model.breakpoints]}


def load_model(path) -> DensityModel:
    return model_from_dict(_load_json(path), str(path))


def save_model(model: DensityModel, path) -> None:
    save_json(model_to_dict(model), path)


# -- correspondences ------------------------------------------------------------------


def correspondence_from_dict(data: dict, source: str = "correspondence") -> Correspondence:
    pairs = _field(data, "pairs", source)
    if not isinstance(pairs, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(x, int) for x in p) for p in pairs
    ):
        raise ValidationError("pairs must be a list of [left, right] integer pairs", f"{source}.pairs")
    try:
        return Correspondence(pairs, data.get("left_cover"), data.get("right_cover"))
    except ValueError as exc:
        raise ValidationError(str(exc), source) from None


def load_correspondence(path) -> Correspondence:
    return correspondence_from_dict(_load_json(path), str(path))
