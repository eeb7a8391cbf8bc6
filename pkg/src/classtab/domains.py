"""Integration regions and p-norms.

Every domain answers the same questions: membership, volume, uniform
sampling, bounding box, diameter, and the two distances needed by the
extension semantics (from an interior point to the complement, and from an
exterior point to the domain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ._special import lgamma

__all__ = [
    "NormP",
    "check_p",
    "lp_norm",
    "Domain",
    "Box",
    "Ball",
    "FiniteSet",
    "BoxUnion",
    "unit_ball_sample",
]


def check_p(p) -> float:
    if isinstance(p, NormP):
        return p.p
    if isinstance(p, str):
        p = math.inf if p.lower() in ("inf", "infinity", "max") else float(p)
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def lp_norm(v, p, axis=-1):
    v = np.abs(np.asarray(v, dtype=float))
    if p == math.inf:
        return v.max(axis=axis) if v.shape[axis] else np.zeros(v.shape[:axis] + v.shape[axis + 1:])
    if p == 1.0:
        return v.sum(axis=axis)
    if p == 2.0:
        return np.sqrt(np.sum(v * v, axis=axis))
    return np.sum(v ** p, axis=axis) ** (1.0 / p)


@dataclass(frozen=True)
class NormP:
    """The l_p norm on R^d, 1 <= p <= inf (``math.inf`` for the max norm)."""

    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "p", check_p(self.p))

    def norm(self, v, axis=-1):
        return lp_norm(v, self.p, axis=axis)

    def distance(self, x, y):
        return lp_norm(np.asarray(x, float) - np.asarray(y, float), self.p)

    def __float__(self):
        return self.p


def unit_ball_sample(rng, n, d, p):
    """Uniform samples from the closed unit l_p ball in R^d."""
    if p == math.inf:
        return rng.uniform(-1.0, 1.0, size=(n, d))
    if p == 2.0:
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * rng.random((n, 1)) ** (1.0 / d)
    # Barthe-Guedon-Mendelson-Naor: density ~ exp(-|t|^p) plus an Exp(1) slack
    y = rng.gamma(1.0 / p, 1.0, size=(n, d)) ** (1.0 / p)
    y *= rng.choice([-1.0, 1.0], size=(n, d))
    w = rng.exponential(1.0, size=(n, 1))
    return y / (np.sum(np.abs(y) ** p, axis=1, keepdims=True) + w) ** (1.0 / p)


def _as_points(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.shape[0] == d else X.reshape(-1, 1)
    if X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X


class Domain:
    """Base class; subclasses are immutable."""

    dim: int

    def contains(self, X):
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    def sample(self, rng, n=None):
        rng = np.random.default_rng(rng)
        pts = self._sample(rng, 1 if n is None else int(n))
        return pts[0] if n is None else pts

    def bounding_box(self):
        raise NotImplementedError

    def diameter(self, p) -> float:
        raise NotImplementedError

    def complement_distance(self, X, p):
        """Distance from points inside the domain to its complement."""
        raise NotImplementedError

    def distance_to(self, X, p):
        """Distance from arbitrary points to the (closed) domain."""
        raise NotImplementedError

    def scaled(self, c):
        raise NotImplementedError

    def project(self, X):
        """A nearby point of the domain (Euclidean nearest where cheap); identity by default."""
        return self.points(X)

    def points(self, X):
        return _as_points(X, self.dim)


@dataclass(frozen=True, eq=False)
class Box(Domain):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-d arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError("Box requires lo < hi componentwise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n, a):
        return cls(np.full(n, -float(a)), np.full(n, float(a)))

    @property
    def dim(self):
        return self.lo.shape[0]

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash(("Box", self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"

    def contains(self, X):
        X = self.points(X)
        return np.all((X >= self.lo) & (X <= self.hi), axis=1)

    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def _sample(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.random((n, self.dim))

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def diameter(self, p):
        return float(lp_norm(self.hi - self.lo, check_p(p)))

    def complement_distance(self, X, p):
        # any exit needs one coordinate to cross a face; unit axis vectors have norm 1 for every p
        X = self.points(X)
        gap = np.minimum(X - self.lo, self.hi - X).min(axis=1)
        return np.maximum(gap, 0.0)

    def complement_witness(self, X):
        X = self.points(X)
        lo_gap = X - self.lo
        hi_gap = self.hi - X
        W = X.copy()
        rows = np.arange(X.shape[0])
        gaps = np.concatenate([lo_gap, hi_gap], axis=1)
        k = gaps.argmin(axis=1)
        ax = k % self.dim
        W[rows, ax] = np.where(k < self.dim, self.lo[ax], self.hi[ax])
        return W

    def distance_to(self, X, p):
        X = self.points(X)
        gap = np.maximum(np.maximum(self.lo - X, X - self.hi), 0.0)
        return lp_norm(gap, check_p(p))

    def inflated(self, r):
        return Box(self.lo - r, self.hi + r)

    def project(self, X):
        return np.clip(self.points(X), self.lo, self.hi)

    def scaled(self, c):
        return Box(self.lo * c, self.hi * c)


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    """Closed Euclidean ball."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float)).copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("Ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def centered(cls, n, radius):
        return cls(np.zeros(n), radius)

    @property
    def dim(self):
        return self.center.shape[0]

    def __eq__(self, other):
        return (isinstance(other, Ball) and np.array_equal(self.center, other.center)
                and self.radius == other.radius)

    def __hash__(self):
        return hash(("Ball", self.center.tobytes(), self.radius))

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    def contains(self, X):
        X = self.points(X)
        return np.linalg.norm(X - self.center, axis=1) <= self.radius

    def volume(self):
        n = self.dim
        return math.exp(0.5 * n * math.log(math.pi) - lgamma(0.5 * n + 1.0)) * self.radius ** n

    def _sample(self, rng, n):
        return self.center + self.radius * unit_ball_sample(rng, n, self.dim, 2.0)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def diameter(self, p):
        p = check_p(p)
        inv = 0.0 if p == math.inf else 1.0 / p
        return 2.0 * self.radius * self.dim ** max(0.0, inv - 0.5)

    def complement_distance(self, X, p):
        p = check_p(p)
        W = self.points(X) - self.center
        R = self.radius
        r2 = np.sum(W * W, axis=1)
        if p == 2.0:
            out = R - np.sqrt(r2)
        elif p == 1.0:
            # extreme points of the l1 ball are +-t e_i; the best axis is the largest |w_i|
            m = np.abs(W).max(axis=1)
            out = -m + np.sqrt(np.maximum(m * m + R * R - r2, 0.0))
        elif p == math.inf:
            s = np.abs(W).sum(axis=1)
            d = self.dim
            out = (-s + np.sqrt(np.maximum(s * s - d * (r2 - R * R), 0.0))) / d
        else:
            out = np.array([_sphere_min_dist(w, R, p) for w in W])
        return np.maximum(out, 0.0)

    def distance_to(self, X, p):
        p = check_p(p)
        W = self.points(X) - self.center
        r = np.linalg.norm(W, axis=1)
        out = np.zeros(W.shape[0])
        outside = r > self.radius
        if p == 2.0:
            out[outside] = r[outside] - self.radius
        else:
            for i in np.flatnonzero(outside):
                out[i] = _sphere_min_dist(W[i], self.radius, p)
        return out

    def scaled(self, c):
        return Ball(self.center * c, self.radius * c)

    def project(self, X):
        W = self.points(X) - self.center
        r = np.linalg.norm(W, axis=1, keepdims=True)
        shrink = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        out = self.center + W * shrink
        # rounding can leave the scaled point a hair outside
        bad = ~self.contains(out)
        out[bad] = self.center + W[bad] * shrink[bad] * (1.0 - 1e-15)
        return out


def _sphere_min_dist(w, R, p):
    """min over unit u of ||w - R u||_p, by local search from several starts."""
    d = w.shape[0]

    def obj(y):
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return np.inf
        return float(lp_norm(w - R * y / nrm, p))

    starts = [np.eye(d)[i] * s for i in range(d) for s in (1.0, -1.0)]
    if np.linalg.norm(w) > 0:
        starts += [w, np.sign(w) + (w == 0)]
    best = math.inf
    for y0 in starts:
        res = optimize.minimize(obj, y0, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


@dataclass(frozen=True, eq=False)
class FiniteSet(Domain):
    """A finite point set; it has Lebesgue measure zero."""

    pts: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.pts, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, 1)
        if P.shape[0] < 1:
            raise ValueError("FiniteSet needs at least one point")
        P = P.copy()
        P.flags.writeable = False
        object.__setattr__(self, "pts", P)

    @property
    def dim(self):
        return self.pts.shape[1]

    def contains(self, X):
        X = self.points(X)
        eq = np.all(X[:, None, :] == self.pts[None, :, :], axis=2)
        return eq.any(axis=1)

    def volume(self):
        return 0.0

    def _sample(self, rng, n):
        return self.pts[rng.integers(0, self.pts.shape[0], size=n)]

    def bounding_box(self):
        return self.pts.min(axis=0), self.pts.max(axis=0)

    def diameter(self, p):
        p = check_p(p)
        D = lp_norm(self.pts[:, None, :] - self.pts[None, :, :], p)
        return float(D.max())

    def complement_distance(self, X, p):
        return np.zeros(self.points(X).shape[0])

    def distance_to(self, X, p):
        X = self.points(X)
        return lp_norm(X[:, None, :] - self.pts[None, :, :], check_p(p)).min(axis=1)

    def scaled(self, c):
        return FiniteSet(self.pts * c)


@dataclass(frozen=True, eq=False)
class BoxUnion(Domain):
    """Union of pairwise separated boxes (closures must not touch)."""

    boxes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise ValueError("BoxUnion needs at least one box")
        d = boxes[0].dim
        for i, a in enumerate(boxes):
            if a.dim != d:
                raise ValueError("all boxes must share a dimension")
            for b in boxes[i + 1:]:
                if np.all((a.lo <= b.hi) & (b.lo <= a.hi)):
                    raise ValueError("boxes in a BoxUnion must be separated")
        object.__setattr__(self, "boxes", boxes)

    @property
    def dim(self):
        return self.boxes[0].dim

    def __eq__(self, other):
        return isinstance(other, BoxUnion) and self.boxes == other.boxes

    def __hash__(self):
        return hash(("BoxUnion",) + self.boxes)

    def contains(self, X):
        X = self.points(X)
        return np.any([b.contains(X) for b in self.boxes], axis=0)

    def volume(self):
        return float(sum(b.volume() for b in self.boxes))

    def _sample(self, rng, n):
        w = np.array([b.volume() for b in self.boxes])
        which = rng.choice(len(self.boxes), size=n, p=w / w.sum())
        out = np.empty((n, self.dim))
        for k, b in enumerate(self.boxes):
            idx = np.flatnonzero(which == k)
            out[idx] = b._sample(rng, idx.size)
        return out

    def bounding_box(self):
        lo = np.min([b.lo for b in self.boxes], axis=0)
        hi = np.max([b.hi for b in self.boxes], axis=0)
        return lo, hi

    def diameter(self, p):
        lo, hi = self.bounding_box()
        return float(lp_norm(hi - lo, check_p(p)))

    def complement_distance(self, X, p):
        X = self.points(X)
        out = np.zeros(X.shape[0])
        for b in self.boxes:
            inside = b.contains(X)
            out[inside] = b.complement_distance(X[inside], p)
        return out

    def distance_to(self, X, p):
        X = self.points(X)
        return np.min([b.distance_to(X, p) for b in self.boxes], axis=0)

    def scaled(self, c):
        return BoxUnion(tuple(b.scaled(c) for b in self.boxes))

    def project(self, X):
        X = self.points(X)
        cands = np.stack([b.project(X) for b in self.boxes])
        k = np.argmin(np.linalg.norm(cands - X[None], axis=2), axis=0)
        return cands[k, np.arange(X.shape[0])]
