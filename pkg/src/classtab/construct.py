"""Constructive objects: class prediction, the H field, stable sets, hat functions.

Slots: the extended label set is sorted ascending, so the reject label -1
occupies slot 1 and the field's labels follow in increasing order.
Slot indices are 1-based throughout, matching ``class_prediction``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._parallel import child_rng
from .distance import BOUNDARY_MODES, boundary_distances
from .domains import Box, check_p, lp_norm
from .fields import REJECT, ExtendedField, LabelField, extend

__all__ = [
    "class_prediction",
    "label_slots",
    "HField",
    "h_field",
    "lipschitz_check_H",
    "StableSet",
    "stable_set",
    "omega",
    "compose_G",
    "empirical_lipschitz",
    "grid_points",
]

_STREAM_PAIRS = 5
_MIN_SEPARATION = 1e-6


def class_prediction(v):
    """First index (1-based) attaining the maximum; accepts (q,) or (n, q)."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise ValueError("class_prediction needs a non-empty vector")
    out = np.argmax(v, axis=-1) + 1
    return int(out) if v.ndim == 1 else out


def label_slots(field):
    """Extended labels in slot order: (-1, y_1 < y_2 < ...)."""
    return tuple(sorted(extend(field).extended_label_set))


class HField:
    """Vector field with h(x) in the slot of f-bar(x) and zeros elsewhere.

    In ``extension`` mode H is defined on all of R^d: outside M the label is
    -1 and h is the distance to M. In ``interior`` mode only points of M are
    accepted.
    """

    def __init__(self, field, p=2.0, boundary_mode="extension"):
        if boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        self.fbar = extend(field)
        self.p = check_p(p)
        self.boundary_mode = boundary_mode
        self.slots = label_slots(self.fbar)
        self._slot_array = np.asarray(self.slots, dtype=np.int64)

    @property
    def q(self):
        return len(self.slots)

    @property
    def dim(self):
        return self.fbar.dim

    @property
    def error_bound(self):
        return float(self.fbar.base.error_bound(self.p))

    def slot_of(self, labels):
        """0-based slot index of each label."""
        labels = np.ravel(labels)
        idx = np.searchsorted(self._slot_array, labels)
        if np.any(idx >= self.q) or np.any(self._slot_array[np.minimum(idx, self.q - 1)] != labels):
            raise ValueError("label outside the extended label set")
        return idx

    def distances(self, X):
        """(h, labels) for an (n, d) batch."""
        X = self.fbar.base.points(X)
        inside = self.fbar.contains(X)
        if self.boundary_mode == "interior" and not inside.all():
            raise ValueError("interior-mode H is only defined on M")
        h = np.empty(X.shape[0])
        lab = np.full(X.shape[0], REJECT, dtype=np.int64)
        if inside.any():
            h[inside], _, _ = boundary_distances(self.fbar, X[inside], self.p, "pointwise",
                                                 self.boundary_mode)
            lab[inside] = self.fbar.base.predict(X[inside])
        if not inside.all():
            h[~inside] = self.fbar.domain.distance_to(X[~inside], self.p)
        return h, lab

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1 and X.shape[0] == self.dim
        h, lab = self.distances(X)
        out = np.zeros((h.shape[0], self.q))
        out[np.arange(h.shape[0]), self.slot_of(lab)] = h
        return out[0] if single else out

    def mapping(self):
        return {int(lab): i + 1 for i, lab in enumerate(self.slots)}


def h_field(field, x, p=2.0, boundary_mode="extension"):
    """H(x); a single point gives a (q,) vector, a batch gives (n, q)."""
    return HField(field, p, boundary_mode)(x)


def grid_points(box: Box, resolution):
    """Cell midpoints of ``box`` at spacing close to ``resolution`` (row-major)."""
    counts = np.maximum(1, np.round((box.hi - box.lo) / float(resolution)).astype(int))
    w = (box.hi - box.lo) / counts
    axes = [box.lo[a] + (np.arange(counts[a]) + 0.5) * w[a] for a in range(box.dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)


def _pair_ratios(fx, fy, X, Y, p):
    sep = lp_norm(X - Y, p)
    keep = sep >= _MIN_SEPARATION
    num = lp_norm(np.atleast_2d(fx - fy).reshape(len(X), -1), p)
    ratio = np.where(keep, num / np.where(keep, sep, 1.0), -np.inf)
    return ratio


def _near_boundary_pairs(fbar: ExtendedField, X, p):
    """Pairs straddling the boundary: x's nearest competitor, then that point's nearest match."""
    base = fbar.base
    own = base.predict(X)
    _, w = base.other_distance(X, own, p)
    ok = np.all(np.isfinite(w), axis=1)
    X, own, w = X[ok], own[ok], w[ok]
    if X.shape[0] == 0:
        return X, X
    w = fbar.domain.project(w)
    back = np.empty_like(w)
    for lab in np.unique(own):
        idx = np.flatnonzero(own == lab)
        _, b = base.label_distance(w[idx], int(lab), p)
        back[idx] = b
    back = fbar.domain.project(back)
    ok = np.all(np.isfinite(back), axis=1) & fbar.contains(w) & fbar.contains(back)
    return back[ok], w[ok]


def _max_pair(ratio, X, Y):
    if ratio.size == 0 or not np.isfinite(ratio).any():
        return 0.0, None
    i = int(np.argmax(ratio))
    return float(ratio[i]), (X[i].copy(), Y[i].copy())


def lipschitz_check_H(field, p=2.0, pair_count=10 ** 5, seed=0, boundary_mode="extension"):
    """Max of ||H(x) - H(y)||_p / ||x - y||_p over sampled pairs in M.

    Half the pairs are uniform, the other half sit near the boundary:
    small perturbations at log-uniform scales and pairs straddling it.
    Pairs closer than 1e-6 are skipped. Returns ``(max_ratio, (x, y))``.
    """
    if pair_count < 1:
        raise ValueError("pair_count must be >= 1")
    H = HField(field, p, boundary_mode)
    fbar = H.fbar
    dom = fbar.domain
    rng = child_rng(seed, _STREAM_PAIRS)
    n_uni = (pair_count + 1) // 2
    n_near = pair_count - n_uni
    Xs = [dom.sample(rng, n_uni)]
    Ys = [dom.sample(rng, n_uni)]
    if n_near:
        n_pert = n_near - n_near // 2
        X = dom.sample(rng, n_pert)
        scale = 10.0 ** rng.uniform(-5, -1, size=(n_pert, 1))
        Y = X + scale * rng.uniform(-1, 1, size=X.shape)
        keep = fbar.contains(Y) if boundary_mode == "interior" else np.ones(n_pert, bool)
        Xs.append(X[keep])
        Ys.append(Y[keep])
        bx, by = _near_boundary_pairs(fbar, dom.sample(rng, n_near // 2), p)
        Xs.append(bx)
        Ys.append(by)
    X = np.concatenate(Xs)
    Y = np.concatenate(Ys)
    ratio = _pair_ratios(H(X), H(Y), X, Y, p)
    return _max_pair(ratio, X, Y)


def empirical_lipschitz(target, pair_count=10 ** 5, p=2.0, seed=0, domain=None):
    """Largest finite-difference ratio over sampled pairs (a lower bound on the Lipschitz constant).

    ``target`` is a label field (labels are treated as numbers) or a callable
    on (n, d) arrays together with ``domain``. Half the pairs are uniform;
    the rest are pushed onto the boundary, using nearest-competitor witnesses
    for fields and segment bisection for plain callables.
    """
    if pair_count < 1:
        raise ValueError("pair_count must be >= 1")
    p = check_p(p)
    rng = child_rng(seed, _STREAM_PAIRS + 1)
    if isinstance(target, (LabelField, ExtendedField)):
        fbar = extend(target)
        fn = fbar.base.predict
        dom = fbar.domain if domain is None else domain
    else:
        if domain is None:
            raise ValueError("a domain is required for a plain function")
        fbar, fn, dom = None, target, domain

    def values(Z):
        return np.asarray(fn(Z), dtype=float).reshape(len(Z), -1)

    n_uni = (pair_count + 1) // 2
    n_near = pair_count - n_uni
    X, Y = dom.sample(rng, n_uni), dom.sample(rng, n_uni)
    Xs, Ys = [X], [Y]
    if n_near:
        if fbar is not None:
            bx, by = _near_boundary_pairs(fbar, dom.sample(rng, n_near), p)
        else:
            bx, by = _bisected_pairs(values, dom, rng, n_near)
        Xs.append(bx)
        Ys.append(by)
    X, Y = np.concatenate(Xs), np.concatenate(Ys)
    if X.shape[0] == 0:
        return 0.0
    ratio = _pair_ratios(values(X), values(Y), X, Y, p)
    best, _ = _max_pair(ratio, X, Y)
    return max(best, 0.0)


def _bisected_pairs(values, dom, rng, n, steps=30):
    X, Y = dom.sample(rng, n), dom.sample(rng, n)
    diff = np.any(values(X) != values(Y), axis=1)
    X, Y = X[diff], Y[diff]
    if X.shape[0] == 0:
        return X, Y
    vx = values(X)
    for _ in range(steps):
        M = 0.5 * (X + Y)
        same = np.all(values(M) == vx, axis=1)
        X = np.where(same[:, None], M, X)
        Y = np.where(same[:, None], Y, M)
    return X, Y


@dataclass(frozen=True)
class StableSet:
    """Grid points of M whose boundary distance certifiably exceeds epsilon."""

    epsilon: float
    members: np.ndarray
    labels: np.ndarray
    grid_size: int
    provenance: dict = dc_field(default_factory=dict)
    empty: bool = False

    def __len__(self):
        return int(self.members.shape[0])

    def key_set(self):
        return {tuple(row) for row in self.members.tolist()}


def stable_set(field, epsilon, p=2.0, boundary_mode="extension", resolution=None, points=None):
    """M_eps on a grid: members satisfy h - error_bound > epsilon.

    The grid is the midpoint grid of the bounding box of M at ``resolution``
    (default: 1/200 of the widest side), restricted to M; ``points`` overrides it.
    """
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    fbar = extend(field)
    p = check_p(p)
    lo, hi = fbar.domain.bounding_box()
    box = Box(lo, hi)
    if points is None:
        if resolution is None:
            resolution = float(np.max(box.hi - box.lo)) / 200.0
        G = grid_points(box, resolution)
    else:
        G = fbar.base.points(points)
    G = G[fbar.contains(G)]
    h, eb, _ = boundary_distances(fbar, G, p, "pointwise", boundary_mode)
    keep = (h - eb) > epsilon
    members = G[keep]
    empty = members.shape[0] == 0
    if empty:
        warnings.warn(f"stable set is empty at epsilon={epsilon}", RuntimeWarning, stacklevel=2)
    prov = {
        "field": repr(fbar.base),
        "p": "inf" if p == math.inf else p,
        "boundary_mode": boundary_mode,
        "resolution": None if resolution is None else float(resolution),
    }
    return StableSet(epsilon, members, fbar.base.predict(members) if len(members) else
                     np.zeros(0, dtype=np.int64), int(G.shape[0]), prov, empty)


def omega(i, x):
    """Hat function centred at integer i with support (i - 1, i + 1)."""
    x = np.asarray(x, dtype=float)
    out = np.maximum(0.0, 1.0 - np.abs(x - i))
    return float(out) if out.ndim == 0 else out


def compose_G(g, q, x=None):
    """G = (omega_1(g), ..., omega_q(g)).

    ``g`` is either a callable evaluated at ``x`` or precomputed scalar values.
    """
    q = int(q)
    if q < 1:
        raise ValueError("q must be >= 1")
    vals = g(x) if callable(g) else g
    vals = np.asarray(vals, dtype=float)
    centres = np.arange(1, q + 1, dtype=float)
    out = np.maximum(0.0, 1.0 - np.abs(vals[..., None] - centres))
    return out
