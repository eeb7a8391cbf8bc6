"""Classification functions f: M -> Y and their extension by the reject label -1.

Three representations share one interface:

* ``PointCloud`` -- labelled points; a query point takes the label of its
  Euclidean nearest neighbour, and boundary distances are exact
  nearest-neighbour distances among the cloud points.
* ``GridField`` -- labels on the cells of a regular grid over a box,
  evaluated by nearest-cell (piecewise constant) lookup.
* ``OracleField`` -- a host-supplied vectorised label function on a domain.
  Labels are exact; boundary distances are scanned on a raster of the
  function at a declared resolution, optionally sharpened by candidate
  points (finite exceptional sets, or a per-point candidate generator).
"""

from __future__ import annotations

import itertools
import math
import threading

import numpy as np
from scipy.spatial import cKDTree

from ._parallel import n_workers
from .domains import Box, Domain, check_p, lp_norm

__all__ = [
    "REJECT",
    "LabelField",
    "PointCloud",
    "GridField",
    "OracleField",
    "ExtendedField",
    "extend",
    "relabel",
    "rescale_domain",
]

REJECT = -1


def _check_labels(labels):
    labels = np.asarray(labels)
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        as_int = labels.astype(np.int64)
        if not np.array_equal(as_int, labels):
            raise ValueError("labels must be integers")
        labels = as_int
    labels = labels.astype(np.int64)
    if labels.size and labels.min() < 1:
        raise ValueError("labels must be positive integers (-1 is reserved for the extension)")
    return labels


class _LabelMap:
    """Vectorised lookup for an injective relabelling."""

    def __init__(self, mapping):
        keys = np.array(sorted(mapping), dtype=np.int64)
        self.keys = keys
        self.values = np.array([mapping[k] for k in keys], dtype=np.int64)

    def __call__(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        idx = np.searchsorted(self.keys, labels)
        idx = np.clip(idx, 0, len(self.keys) - 1)
        if not np.all(self.keys[idx] == labels):
            raise ValueError("label outside the relabelling's domain")
        return self.values[idx]


class _ComposedEvaluator:
    def __init__(self, evaluator, label_map):
        self.evaluator = evaluator
        self.label_map = label_map

    def __call__(self, X):
        return self.label_map(self.evaluator(X))


class _ScaledEvaluator:
    def __init__(self, evaluator, c):
        self.evaluator = evaluator
        self.c = c

    def __call__(self, X):
        return self.evaluator(np.asarray(X, float) / self.c)


class _ScaledCandidates:
    def __init__(self, candidates, c):
        self.candidates = candidates
        self.c = c

    def __call__(self, X):
        return self.candidates(np.asarray(X, float) / self.c) * self.c


def _box_distance(X, lo, hi, p):
    gap = np.maximum(np.maximum(lo - X, X - hi), 0.0)
    return lp_norm(gap, p)


class _CellIndex:
    """Exact distances from points to unions of grid cells.

    Only cells on an interface are indexed: the closest point of a target
    cell is always reached through a cell that is not a target, so interior
    cells of a target region can never be the nearest.
    """

    _K = 4

    def __init__(self, box: Box, counts, labels, valid=None):
        self.box = box
        self.counts = tuple(int(c) for c in counts)
        self.width = (box.hi - box.lo) / np.array(self.counts, dtype=float)
        self.labels = np.asarray(labels, dtype=np.int64).reshape(self.counts)
        self.valid = (np.ones(self.counts, dtype=bool) if valid is None
                      else np.asarray(valid, dtype=bool).reshape(self.counts))
        self._trees = {}
        self._lock = threading.Lock()

    # geometry --------------------------------------------------------------
    def cell_of(self, X):
        idx = np.floor((X - self.box.lo) / self.width).astype(np.int64)
        idx = np.clip(idx, 0, np.array(self.counts) - 1)
        return np.ravel_multi_index(tuple(idx.T), self.counts)

    def centers(self, flat=None):
        grids = [self.box.lo[a] + (np.arange(n) + 0.5) * self.width[a] for a, n in enumerate(self.counts)]
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, len(self.counts))
        return mesh if flat is None else mesh[flat]

    def diagonal(self, p):
        return float(lp_norm(self.width, p))

    def _touching(self, mask):
        """Cells with a neighbour (incl. diagonal) where ``mask`` holds."""
        d = len(self.counts)
        pad = np.pad(mask, 1, constant_values=False)
        out = np.zeros(self.counts, dtype=bool)
        for off in itertools.product((-1, 0, 1), repeat=d):
            if not any(off):
                continue
            sl = tuple(slice(1 + o, 1 + o + n) for o, n in zip(off, self.counts))
            out |= pad[sl]
        return out

    def _entry(self, key):
        with self._lock:
            if key in self._trees:
                return self._trees[key]
            kind, lab = key
            if kind == "ne":
                target = (self.labels != lab) & self.valid
                through = (self.labels == lab) | ~self.valid
            else:
                target = (self.labels == lab) & self.valid
                through = (self.labels != lab) | ~self.valid
            sel = np.flatnonzero((target & self._touching(through)).ravel())
            if sel.size == 0:
                entry = None
            else:
                multi = np.stack(np.unravel_index(sel, self.counts), axis=1)
                lo = self.box.lo + multi * self.width
                hi = self.box.lo + (multi + 1) * self.width
                ctr = 0.5 * (lo + hi)
                entry = (cKDTree(ctr), lo, hi, ctr)
            self._trees[key] = entry
            return entry

    def query(self, X, key, p):
        n = X.shape[0]
        dist = np.full(n, np.inf)
        wit = np.full(X.shape, np.nan)
        entry = self._entry(key)
        if entry is None or n == 0:
            return dist, wit
        tree, lo, hi, _ = entry
        m = lo.shape[0]
        k = min(self._K, m)
        half = float(lp_norm(self.width / 2.0, p))
        dd, ii = tree.query(X, k=k, p=p, workers=n_workers())
        if k == 1:
            dd, ii = dd[:, None], ii[:, None]
        bd = _box_distance(X[:, None, :], lo[ii], hi[ii], p)
        j = bd.argmin(axis=1)
        rows = np.arange(n)
        best = bd[rows, j]
        arg = ii[rows, j]
        if k < m:
            # a cell whose centre is farther than best + half cannot beat best
            uncertain = np.flatnonzero(dd[:, -1] - half < best)
            if uncertain.size:
                radii = best[uncertain] + half + 1e-12 * (1.0 + best[uncertain])
                lists = tree.query_ball_point(X[uncertain], radii, p=p, workers=n_workers())
                for r, cand in zip(uncertain, lists):
                    cand = np.asarray(cand, dtype=np.int64)
                    if cand.size == 0:
                        continue
                    cd = _box_distance(X[r], lo[cand], hi[cand], p)
                    t = cd.argmin()
                    if cd[t] < best[r]:
                        best[r] = cd[t]
                        arg[r] = cand[t]
        dist[:] = best
        wit[:] = np.clip(X, lo[arg], hi[arg])
        return dist, wit


class LabelField:
    """Common interface. Subclasses are immutable after construction."""

    dim: int
    domain: Domain
    label_set: tuple
    supports_measure = True

    def predict(self, X):
        """Labels of points assumed to lie in the domain."""
        raise NotImplementedError

    def __call__(self, X):
        return self.predict(X)

    def points(self, X):
        return self.domain.points(X)

    def error_bound(self, p) -> float:
        return 0.0

    @property
    def method(self):
        return "exact_nn"

    def h_slack(self, p) -> float:
        """delta with |h(x) - h(y)| <= ||x - y||_p + delta for same-label pairs."""
        raise ValueError(f"{type(self).__name__} distances are not Lipschitz; rasterize the field first")

    def other_distance(self, X, own, p):
        """Distance from X to {z in M : f(z) != own}, with a closest point."""
        raise NotImplementedError

    def label_distance(self, X, label, p):
        """Distance from X to {z in M : f(z) == label}, with a closest point."""
        raise NotImplementedError

    def _grouped(self, X, own, fn):
        n = X.shape[0]
        dist = np.full(n, np.inf)
        wit = np.full(X.shape, np.nan)
        for lab in np.unique(own):
            idx = np.flatnonzero(own == lab)
            d, w = fn(X[idx], int(lab))
            dist[idx] = d
            wit[idx] = w
        return dist, wit

    def relabeled(self, label_map):
        raise NotImplementedError

    def rescaled(self, c):
        raise NotImplementedError


class PointCloud(LabelField):
    supports_measure = False

    def __init__(self, points, labels, domain=None):
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        labels = _check_labels(labels).ravel()
        if labels.shape[0] != P.shape[0]:
            raise ValueError("one label per point required")
        if domain is None:
            lo, hi = P.min(axis=0), P.max(axis=0)
            flat = lo == hi
            domain = Box(np.where(flat, lo - 0.5, lo), np.where(flat, hi + 0.5, hi))
        if domain.dim != P.shape[1]:
            raise ValueError("domain dimension does not match the points")
        if not np.all(domain.contains(P)):
            raise ValueError("all points must lie inside the declared domain")
        P = P.copy()
        P.flags.writeable = False
        labels.flags.writeable = False
        self.points_ = P
        self.labels_ = labels
        self.domain = domain
        self.dim = P.shape[1]
        self.label_set = tuple(int(v) for v in np.unique(labels))
        self._all = cKDTree(P)
        self._trees = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"PointCloud(n={self.points_.shape[0]}, dim={self.dim}, labels={self.label_set})"

    def predict(self, X):
        X = self.points(X)
        _, i = self._all.query(X, k=1, workers=n_workers())
        return self.labels_[i]

    def _tree(self, key):
        with self._lock:
            if key not in self._trees:
                kind, lab = key
                mask = self.labels_ != lab if kind == "ne" else self.labels_ == lab
                P = self.points_[mask]
                self._trees[key] = (cKDTree(P), P) if P.shape[0] else None
            return self._trees[key]

    def _nearest(self, X, key, p):
        entry = self._tree(key)
        if entry is None:
            return np.full(X.shape[0], np.inf), np.full(X.shape, np.nan)
        tree, P = entry
        d, i = tree.query(X, k=1, p=p, workers=n_workers())
        return d, P[i]

    def other_distance(self, X, own, p):
        return self._grouped(X, own, lambda Xs, lab: self._nearest(Xs, ("ne", lab), p))

    def label_distance(self, X, label, p):
        return self._nearest(X, ("eq", int(label)), p)

    def relabeled(self, label_map):
        return PointCloud(self.points_, label_map(self.labels_), self.domain)

    def rescaled(self, c):
        return PointCloud(self.points_ * c, self.labels_, self.domain.scaled(c))


class GridField(LabelField):
    def __init__(self, box: Box, resolution, labels):
        if not isinstance(box, Box):
            raise TypeError("GridField needs a Box")
        counts = tuple(int(r) for r in np.atleast_1d(resolution))
        if len(counts) != box.dim or min(counts) < 1:
            raise ValueError("one positive resolution per axis required")
        labels = _check_labels(labels).ravel()
        if labels.shape[0] != int(np.prod(counts)):
            raise ValueError("label array length must equal the product of resolutions")
        labels.flags.writeable = False
        self.domain = box
        self.box = box
        self.resolution = counts
        self.labels = labels
        self.dim = box.dim
        self.label_set = tuple(int(v) for v in np.unique(labels))
        self._index = _CellIndex(box, counts, labels)

    @classmethod
    def from_function(cls, fn, box: Box, resolution):
        counts = tuple(int(r) for r in np.atleast_1d(resolution))
        if len(counts) == 1 and box.dim > 1:
            counts = counts * box.dim
        idx = _CellIndex(box, counts, np.ones(int(np.prod(counts)), dtype=np.int64))
        return cls(box, counts, np.asarray(fn(idx.centers())))

    def __repr__(self):
        return f"GridField(box={self.box!r}, resolution={self.resolution}, labels={self.label_set})"

    def cell_centers(self):
        return self._index.centers()

    def predict(self, X):
        X = self.points(X)
        return self.labels[self._index.cell_of(X)]

    def error_bound(self, p):
        return self._index.diagonal(check_p(p))

    def h_slack(self, p):
        # distances to unions of closed cells are exactly 1-Lipschitz
        return 0.0

    @property
    def method(self):
        return "grid_scan"

    def other_distance(self, X, own, p):
        return self._grouped(X, own, lambda Xs, lab: self._index.query(Xs, ("ne", lab), p))

    def label_distance(self, X, label, p):
        d, w = self._index.query(X, ("eq", int(label)), p)
        here = self.labels.ravel()[self._index.cell_of(X)] == label
        d[here] = 0.0
        w[here] = X[here]
        return d, w

    def relabeled(self, label_map):
        return GridField(self.box, self.resolution, label_map(self.labels))

    def rescaled(self, c):
        return GridField(self.box.scaled(c), self.resolution, self.labels)


class OracleField(LabelField):
    """Host-supplied label function on a domain.

    Parameters
    ----------
    evaluator : callable
        Vectorised ``(n, d) array -> (n,) int labels``; must return labels in
        ``label_set`` for points of the domain.
    domain : Domain
    label_set : iterable of int
    resolution : float or sequence of float, optional
        Raster cell width used by the boundary scan. Defaults to roughly
        2**18 cells over the domain's bounding box.
    candidates : array or callable, optional
        Extra points checked exactly by the scan: a fixed ``(k, d)`` array
        (finite exceptional sets) or ``(n, d) -> (n, k, d)`` generating
        per-point candidates.
    """

    _DEFAULT_CELLS = 2 ** 18

    def __init__(self, evaluator, domain: Domain, label_set, resolution=None, candidates=None):
        self.evaluator = evaluator
        self.domain = domain
        self.dim = domain.dim
        ls = _check_labels(sorted(set(int(v) for v in label_set)))
        if ls.size == 0:
            raise ValueError("label_set must be non-empty")
        self.label_set = tuple(int(v) for v in ls)
        lo, hi = domain.bounding_box()
        ext = np.maximum(hi - lo, 1e-300)
        if resolution is None:
            per_axis = self._DEFAULT_CELLS ** (1.0 / self.dim)
            resolution = float(np.max(ext)) / per_axis
        res = np.broadcast_to(np.asarray(resolution, dtype=float), (self.dim,))
        if np.any(res <= 0):
            raise ValueError("resolution must be positive")
        self.resolution = tuple(float(r) for r in res)
        self._counts = tuple(int(max(1, math.ceil(e / r - 1e-9))) for e, r in zip(ext, res))
        if candidates is not None and not callable(candidates):
            C = np.asarray(candidates, dtype=float).reshape(-1, self.dim)
            C = C[domain.contains(C)] if C.shape[0] else C
            candidates = C
        self.candidates = candidates
        self._index = None
        self._cand_labels = None
        self._lock = threading.Lock()

    def __repr__(self):
        return f"OracleField(domain={self.domain!r}, labels={self.label_set}, resolution={self.resolution})"

    @property
    def constant(self):
        return len(self.label_set) == 1

    def raster(self):
        with self._lock:
            if self._index is None:
                lo, hi = self.domain.bounding_box()
                probe = _CellIndex(Box(lo, hi), self._counts, np.ones(int(np.prod(self._counts)), np.int64))
                C = probe.centers()
                valid = self.domain.contains(C)
                labels = np.full(C.shape[0], self.label_set[0], dtype=np.int64)
                if valid.any():
                    labels[valid] = np.asarray(self.evaluator(C[valid]), dtype=np.int64)
                self._index = _CellIndex(Box(lo, hi), self._counts, labels, valid)
            return self._index

    def predict(self, X):
        X = self.points(X)
        if self.constant:
            return np.full(X.shape[0], self.label_set[0], dtype=np.int64)
        return np.asarray(self.evaluator(X), dtype=np.int64)

    def error_bound(self, p):
        if self.constant:
            return 0.0
        return self.raster().diagonal(check_p(p))

    def h_slack(self, p):
        # within error_bound of the exact, 1-Lipschitz distance at both ends
        return 2.0 * float(self.error_bound(p))

    @property
    def method(self):
        return "exact_nn" if self.constant else "grid_scan"

    def _fixed_candidate_labels(self):
        if self._cand_labels is None:
            C = self.candidates
            self._cand_labels = (np.asarray(self.evaluator(C), dtype=np.int64) if C.shape[0]
                                 else np.zeros(0, np.int64))
        return self._cand_labels

    def _candidate_distance(self, X, own, p, want_equal=False):
        n = X.shape[0]
        dist = np.full(n, np.inf)
        wit = np.full(X.shape, np.nan)
        if self.candidates is None or n == 0:
            return dist, wit
        if callable(self.candidates):
            C = np.asarray(self.candidates(X), dtype=float)
            C = C.reshape(n, -1, self.dim)
            k = C.shape[1]
            flat = C.reshape(-1, self.dim)
            lab = np.asarray(self.evaluator(flat), dtype=np.int64).reshape(n, k)
            ok = self.domain.contains(flat).reshape(n, k)
        else:
            C0 = self.candidates
            if C0.shape[0] == 0:
                return dist, wit
            C = np.broadcast_to(C0, (n,) + C0.shape)
            lab = np.broadcast_to(self._fixed_candidate_labels(), (n, C0.shape[0]))
            ok = np.ones(lab.shape, dtype=bool)
        own = np.asarray(own).reshape(n, 1)
        hit = ok & ((lab == own) if want_equal else (lab != own))
        dd = lp_norm(X[:, None, :] - C, p)
        dd = np.where(hit, dd, np.inf)
        j = dd.argmin(axis=1)
        rows = np.arange(n)
        dist = dd[rows, j]
        found = np.isfinite(dist)
        wit[found] = C[rows[found], j[found]]
        return dist, wit

    def other_distance(self, X, own, p):
        n = X.shape[0]
        if self.constant:
            return np.full(n, np.inf), np.full(X.shape, np.nan)
        idx = self.raster()
        dist, wit = self._grouped(X, own, lambda Xs, lab: idx.query(Xs, ("ne", lab), p))
        # a point whose raster cell disagrees with its exact label touches that cell
        cell = idx.cell_of(X)
        clash = (idx.labels.ravel()[cell] != own) & idx.valid.ravel()[cell]
        dist[clash] = 0.0
        wit[clash] = X[clash]
        cd, cw = self._candidate_distance(X, own, p)
        better = cd < dist
        dist[better] = cd[better]
        wit[better] = cw[better]
        return dist, wit

    def label_distance(self, X, label, p):
        n = X.shape[0]
        if self.constant:
            if label == self.label_set[0]:
                return np.zeros(n), X.copy()
            return np.full(n, np.inf), np.full(X.shape, np.nan)
        idx = self.raster()
        d, w = idx.query(X, ("eq", int(label)), p)
        cell = idx.cell_of(X)
        here = ((idx.labels.ravel()[cell] == label) & idx.valid.ravel()[cell]) | (self.predict(X) == label)
        d[here] = 0.0
        w[here] = X[here]
        cd, cw = self._candidate_distance(X, np.full(n, label), p, want_equal=True)
        better = cd < d
        d[better] = cd[better]
        w[better] = cw[better]
        return d, w

    def relabeled(self, label_map):
        return OracleField(_ComposedEvaluator(self.evaluator, label_map), self.domain,
                           label_map(np.array(self.label_set)), self.resolution, self.candidates)

    def rescaled(self, c):
        cand = self.candidates
        if cand is not None:
            cand = _ScaledCandidates(cand, c) if callable(cand) else cand * c
        return OracleField(_ScaledEvaluator(self.evaluator, c), self.domain.scaled(c), self.label_set,
                           tuple(r * c for r in self.resolution), cand)


class ExtendedField:
    """f-bar: the base field on M and the reject label -1 everywhere else."""

    outside_label = REJECT

    def __init__(self, base: LabelField):
        if isinstance(base, ExtendedField):
            base = base.base
        self.base = base

    def __repr__(self):
        return f"ExtendedField({self.base!r})"

    @property
    def dim(self):
        return self.base.dim

    @property
    def domain(self):
        return self.base.domain

    @property
    def label_set(self):
        return self.base.label_set

    @property
    def extended_label_set(self):
        return (REJECT,) + tuple(self.base.label_set)

    def contains(self, X):
        return self.base.domain.contains(X)

    def evaluate(self, X):
        X = self.base.points(X)
        out = np.full(X.shape[0], REJECT, dtype=np.int64)
        inside = self.contains(X)
        if inside.any():
            out[inside] = self.base.predict(X[inside])
        return out

    __call__ = evaluate


def extend(field) -> ExtendedField:
    return field if isinstance(field, ExtendedField) else ExtendedField(field)


def _base(field):
    return field.base if isinstance(field, ExtendedField) else field


def relabel(field, mapping) -> LabelField:
    """Apply an injective relabelling Y -> positive integers."""
    base = _base(field)
    mapping = {int(k): int(v) for k, v in dict(mapping).items()}
    missing = [y for y in base.label_set if y not in mapping]
    if missing:
        raise ValueError(f"mapping does not cover labels {missing}")
    images = [mapping[y] for y in base.label_set]
    if len(set(images)) != len(images):
        raise ValueError("relabelling must be injective on the label set")
    if min(images) < 1:
        raise ValueError("relabelled values must be positive integers")
    return base.relabeled(_LabelMap({y: mapping[y] for y in base.label_set}))


def rescale_domain(field, c) -> LabelField:
    """g(x) = f(x / c) on the domain scaled by c."""
    c = float(c)
    if not c > 0:
        raise ValueError("scale factor must be positive")
    return _base(field).rescaled(c)
