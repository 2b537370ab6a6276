"""Reading and writing point clouds (JSON lines) and distance matrices (CSV)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .pointcloud import PointCloud
from .sequence_space import SparseVector


def parse_jsonl(lines, p) -> PointCloud:
    ids, vectors = [], []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            pid = obj["id"]
            coords = obj["coords"]
            if not isinstance(pid, str) or not isinstance(coords, list):
                raise TypeError("id must be a string and coords a list")
            pairs = []
            for pair in coords:
                if len(pair) != 2:
                    raise ValueError("coords entries must be [index, value]")
                idx, val = pair
                if isinstance(idx, bool) or not float(idx).is_integer():
                    raise ValueError(f"index {idx!r} is not an integer")
                pairs.append((int(idx), float(val)))
            vec = SparseVector.from_pairs(pairs)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, InputError) as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        ids.append(pid)
        vectors.append(vec)
    if not ids:
        raise InputError("no points in input")
    return PointCloud.from_vectors(ids, vectors, p)


def read_jsonl(path, p) -> PointCloud:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_jsonl(fh, p)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def cloud_to_jsonl(X: PointCloud) -> str:
    out = []
    for pid, v in zip(X.ids, X):
        out.append(json.dumps({"id": pid, "coords": [[i, x] for i, x in v.to_pairs()]}))
    return "\n".join(out) + "\n"


def write_jsonl(X: PointCloud, path) -> None:
    Path(path).write_text(cloud_to_jsonl(X), encoding="utf-8")


def read_distance_csv(path):
    """Header row of ids followed by one row of distances per id."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise InputError("empty distance matrix file")
    ids = [c.strip() for c in rows[0]]
    body = rows[1:]
    # tolerate a leading id column
    if body and len(body[0]) == len(ids) + 1:
        body = [r[1:] for r in body]
    if len(body) != len(ids) or any(len(r) != len(ids) for r in body):
        raise InputError("distance matrix must be square with one header row of ids")
    try:
        D = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise InputError(f"bad distance entry: {exc}") from None
    if not np.all(np.isfinite(D)):
        raise InputError("distance matrix has non-finite entries")
    return ids, D


def fmt(x):
    """Stable text form for CSV cells."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(r.get(h, "")) for h in header))
    return "\n".join(lines) + "\n"
