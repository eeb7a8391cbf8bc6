"""Distance to the decision boundary, pointwise and measure-theoretic.

``boundary_mode="extension"`` is the literal definition: the complement of
M carries the reject label, so the domain edge is a decision boundary.
``boundary_mode="interior"`` restricts competitors to M, which is the
convention behind the worked values for the sign-type examples.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._parallel import child_rng
from .domains import check_p, unit_ball_sample
from .fields import ExtendedField, extend

__all__ = [
    "DistanceEstimate",
    "pointwise_distance",
    "measure_distance",
    "distance_profile",
    "boundary_distances",
    "MODES",
    "BOUNDARY_MODES",
]

MODES = ("pointwise", "measure")
BOUNDARY_MODES = ("extension", "interior")

DEFAULT_TAU = 1e-3
DEFAULT_SAMPLES_PER_RADIUS = 4096
DEFAULT_BISECTION_DEPTH = 40
_STREAM_MEASURE = 2


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    method: str
    error_bound: float
    mode: str
    boundary_mode: str
    saturated: bool = False
    witness: tuple | None = None

    def __post_init__(self):
        if not self.value >= 0 or not self.error_bound >= 0:
            raise ValueError("distance and error bound must be non-negative")
        if self.method == "exact_nn" and self.error_bound != 0:
            raise ValueError("exact_nn estimates carry no error")

    def to_dict(self):
        out = asdict(self)
        out.pop("witness")
        return out


def _check_modes(mode, boundary_mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if boundary_mode not in BOUNDARY_MODES:
        raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}, got {boundary_mode!r}")


def _inside_points(fbar: ExtendedField, X):
    X = fbar.base.points(X)
    inside = fbar.contains(X)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise ValueError(f"point {bad} lies outside the field's domain")
    return X


def _pointwise(fbar, X, p, boundary_mode):
    base = fbar.base
    own = base.predict(X)
    dist, wit = base.other_distance(X, own, p)
    if boundary_mode == "extension":
        comp = base.domain.complement_distance(X, p)
        edge = comp < dist
        if edge.any():
            dist = np.where(edge, comp, dist)
            cw = getattr(base.domain, "complement_witness", None)
            wit[edge] = cw(X[edge]) if cw is not None else np.nan
    return dist, wit


def _measure(fbar, X, p, boundary_mode, samples_per_radius, tau, depth, seed, first_index=0, chunk=128):
    if not fbar.base.supports_measure:
        raise ValueError("measure-theoretic distance is undefined on point clouds")
    if not 0.0 < tau < 0.5:
        raise ValueError("fraction threshold must lie in (0, 0.5)")
    n, d = X.shape
    S = int(samples_per_radius)
    diam = fbar.domain.diameter(p)
    value = np.empty(n)
    width = np.empty(n)
    saturated = np.zeros(n, dtype=bool)
    own_all = fbar.base.predict(X)
    interior = boundary_mode == "interior"
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        m = stop - start
        U = np.stack([unit_ball_sample(child_rng(seed, _STREAM_MEASURE, first_index + i), S, d, p)
                      for i in range(start, stop)])
        Xc = X[start:stop]
        own = own_all[start:stop, None]

        def violates(r):
            Z = (Xc[:, None, :] + r[:, None, None] * U).reshape(-1, d)
            lab = fbar.evaluate(Z).reshape(m, S)
            diff = lab != own
            if interior:
                ok = fbar.contains(Z).reshape(m, S)
                cnt = np.maximum(ok.sum(axis=1), 1)
                frac = (diff & ok).sum(axis=1) / cnt
            else:
                frac = diff.mean(axis=1)
            return frac > tau

        hi = np.full(m, diam)
        lo = np.zeros(m)
        sat = ~violates(hi)
        for _ in range(int(depth)):
            mid = 0.5 * (lo + hi)
            v = violates(mid)
            hi = np.where(v, mid, hi)
            lo = np.where(v, lo, mid)
        value[start:stop] = np.where(sat, diam, hi)
        width[start:stop] = np.where(sat, 0.0, hi - lo)
        saturated[start:stop] = sat
    return value, width, saturated


def boundary_distances(field, X, p=2.0, mode="pointwise", boundary_mode="extension", *,
                       samples_per_radius=DEFAULT_SAMPLES_PER_RADIUS, tau=DEFAULT_TAU,
                       bisection_depth=DEFAULT_BISECTION_DEPTH, seed=0, first_index=0):
    """Vectorised distances for points of M.

    Returns ``(values, error_bounds, saturated)`` arrays.
    """
    _check_modes(mode, boundary_mode)
    p = check_p(p)
    fbar = extend(field)
    X = _inside_points(fbar, X)
    if mode == "pointwise":
        vals, _ = _pointwise(fbar, X, p, boundary_mode)
        eb = np.full(X.shape[0], fbar.base.error_bound(p))
        return vals, eb, np.zeros(X.shape[0], dtype=bool)
    vals, width, sat = _measure(fbar, X, p, boundary_mode, samples_per_radius, tau,
                                bisection_depth, seed, first_index)
    return vals, width, sat


def pointwise_distance(field, x, p=2.0, boundary_mode="extension") -> DistanceEstimate:
    """h(x) = inf { ||x - z||_p : f-bar(z) != f-bar(x) } for x in M.

    Point clouds give exact nearest-neighbour distances; grid and oracle
    fields report the cell diagonal as ``error_bound``. With no competing
    label anywhere the infimum is empty and the value is ``inf``.
    """
    _check_modes("pointwise", boundary_mode)
    p = check_p(p)
    fbar = extend(field)
    X = _inside_points(fbar, x)
    if X.shape[0] != 1:
        raise ValueError("pointwise_distance takes a single point; use distance_profile")
    vals, wit = _pointwise(fbar, X, p, boundary_mode)
    base = fbar.base
    eb = base.error_bound(p)
    w = None if not np.all(np.isfinite(wit[0])) else tuple(float(v) for v in wit[0])
    method = base.method if eb > 0 else "exact_nn"
    return DistanceEstimate(float(vals[0]), method, float(eb), "pointwise", boundary_mode, witness=w)


def measure_distance(field, x, p=2.0, samples_per_radius=DEFAULT_SAMPLES_PER_RADIUS, tau=DEFAULT_TAU,
                     bisection_depth=DEFAULT_BISECTION_DEPTH, boundary_mode="extension", seed=0,
                     index=0) -> DistanceEstimate:
    """Smallest radius at which the label disagrees on a sampled fraction > tau of the ball.

    The radius is bisected over [0, diam(M)] using one fixed set of unit-ball
    samples per point, drawn from the stream (seed, index).
    """
    _check_modes("measure", boundary_mode)
    p = check_p(p)
    fbar = extend(field)
    X = _inside_points(fbar, x)
    if X.shape[0] != 1:
        raise ValueError("measure_distance takes a single point; use distance_profile")
    v, w, s = _measure(fbar, X, p, boundary_mode, samples_per_radius, tau, bisection_depth, seed, index)
    return DistanceEstimate(float(v[0]), "radius_bisection", float(w[0]), "measure", boundary_mode,
                            saturated=bool(s[0]))


def distance_profile(field, points, p=2.0, mode="pointwise", boundary_mode="extension", *, seed=0,
                     samples_per_radius=DEFAULT_SAMPLES_PER_RADIUS, tau=DEFAULT_TAU,
                     bisection_depth=DEFAULT_BISECTION_DEPTH):
    """Batch version; element i equals the single-point call (for measure mode, with index=i)."""
    _check_modes(mode, boundary_mode)
    p = check_p(p)
    fbar = extend(field)
    pts = list(points) if not isinstance(points, np.ndarray) else points
    if len(pts) == 0:
        return []
    X = fbar.base.points(np.asarray(pts, dtype=float))
    inside = fbar.contains(X)
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise ValueError(f"point {bad} lies outside the field's domain")
    if mode == "pointwise":
        vals, wit = _pointwise(fbar, X, p, boundary_mode)
        eb = float(fbar.base.error_bound(p))
        method = fbar.base.method if eb > 0 else "exact_nn"
        return [DistanceEstimate(float(v), method, eb, "pointwise", boundary_mode,
                                 witness=tuple(map(float, w)) if np.all(np.isfinite(w)) else None)
                for v, w in zip(vals, wit)]
    vals, width, sat = _measure(fbar, X, p, boundary_mode, samples_per_radius, tau, bisection_depth, seed)
    return [DistanceEstimate(float(v), "radius_bisection", float(w), "measure", boundary_mode, saturated=bool(s))
            for v, w, s in zip(vals, width, sat)]


def outside_distance(field, X, p):
    """Distance from points off M to M (the competitors of the reject label)."""
    fbar = extend(field)
    return fbar.domain.distance_to(X, check_p(p))
