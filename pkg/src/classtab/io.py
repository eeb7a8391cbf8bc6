"""Reading and writing label fields.

Point clouds are CSV with header ``x_1,...,x_d,label``. Grid fields are a
one-line JSON header ``{"dim", "lo", "hi", "resolution", "label_set"}``
followed by the labels in row-major order, one CSV line per run along the
last axis. Floats are written with ``repr`` so a round trip is bit-exact.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .domains import Box
from .fields import GridField, PointCloud, extend

__all__ = ["load_field", "save_field", "write_point_cloud", "read_point_cloud", "write_grid",
           "read_grid", "write_points_csv"]


def write_points_csv(fh, X, labels=None):
    X = np.asarray(X, dtype=float)
    d = X.shape[1] if X.ndim == 2 else 0
    w = csv.writer(fh, lineterminator="\n")
    header = [f"x_{i + 1}" for i in range(d)]
    if labels is not None:
        header.append("label")
    w.writerow(header)
    for i, row in enumerate(X):
        out = [repr(float(v)) for v in row]
        if labels is not None:
            out.append(str(int(labels[i])))
        w.writerow(out)


def write_point_cloud(field: PointCloud, path):
    with open(path, "w", newline="") as fh:
        write_points_csv(fh, field.points_, field.labels_)


def read_point_cloud(path_or_text, domain=None) -> PointCloud:
    fh = _open_text(path_or_text)
    rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty point-cloud file")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "label":
        raise ValueError("point-cloud header must end with 'label'")
    d = len(header) - 1
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError("point cloud has no points")
    if any(len(r) != d + 1 for r in body):
        raise ValueError("ragged point-cloud row")
    X = np.array([[float(v) for v in r[:d]] for r in body], dtype=float)
    y = np.array([int(r[d]) for r in body], dtype=np.int64)
    return PointCloud(X, y, domain)


def write_grid(field: GridField, path):
    header = {
        "dim": field.dim,
        "lo": [float(v) for v in field.box.lo],
        "hi": [float(v) for v in field.box.hi],
        "resolution": [int(c) for c in field.resolution],
        "label_set": [int(v) for v in field.label_set],
    }
    labels = np.asarray(field.labels).reshape(field.resolution)
    rows = labels.reshape(-1, labels.shape[-1])
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(header) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow([str(int(v)) for v in r])


def read_grid(path_or_text) -> GridField:
    fh = _open_text(path_or_text)
    header = json.loads(fh.readline())
    for key in ("dim", "lo", "hi", "resolution"):
        if key not in header:
            raise ValueError(f"grid header is missing {key!r}")
    counts = tuple(int(c) for c in header["resolution"])
    if len(counts) != int(header["dim"]):
        raise ValueError("resolution length must equal dim")
    vals = [int(v) for row in csv.reader(fh) for v in row if v.strip()]
    labels = np.array(vals, dtype=np.int64)
    if labels.size != int(np.prod(counts)):
        raise ValueError(f"expected {int(np.prod(counts))} labels, found {labels.size}")
    field = GridField(Box(header["lo"], header["hi"]), counts, labels.reshape(counts))
    declared = header.get("label_set")
    if declared is not None and not set(np.unique(labels)) <= {int(v) for v in declared}:
        raise ValueError("grid contains labels outside its declared label_set")
    return field


def _open_text(src):
    if isinstance(src, Path) or (isinstance(src, str) and src and "\n" not in src and Path(src).is_file()):
        return open(src, newline="")
    if isinstance(src, str):
        return _io.StringIO(src)
    return src


def load_field(path):
    """Load a grid (JSON header line) or point-cloud CSV file."""
    with open(path) as fh:
        first = fh.read(1)
    return read_grid(path) if first == "{" else read_point_cloud(path)


def save_field(field, path):
    base = extend(field).base
    if isinstance(base, GridField):
        write_grid(base, path)
    elif isinstance(base, PointCloud):
        write_point_cloud(base, path)
    else:
        raise ValueError(f"cannot serialise {type(base).__name__}; only grid and point-cloud fields")
