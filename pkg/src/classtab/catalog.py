"""Built-in example fields.

Labels must be positive, so the two sign classes are encoded as
``SIGN_LABELS = {+1: 1, -1: 2}`` and the {0, 1}-valued step examples as
{1, 2}. ``H2`` uses {1, 1001} so that its label gap is still 1000.
"""

from __future__ import annotations

import numpy as np

from .domains import Ball, Box, BoxUnion
from .fields import GridField, OracleField, relabel, rescale_domain

__all__ = ["SIGN_LABELS", "CATALOG", "builtin_field", "sign_labels", "DYADIC_BITS"]

SIGN_LABELS = {1: 1, -1: 2}
POS, NEG = SIGN_LABELS[1], SIGN_LABELS[-1]

# f3-analog: the dyadic lattice 2**-DYADIC_BITS Z stands in for the rationals
DYADIC_BITS = 24
_SCALE = float(2 ** DYADIC_BITS)

_1D_RES = 1e-4


def sign_labels(x):
    """sgn with sgn(0) = +1, encoded through SIGN_LABELS."""
    return np.where(np.asarray(x, float) >= 0, POS, NEG)


def _col(X):
    return np.asarray(X, dtype=float)[:, 0]


def _counts(box, res):
    return tuple(int(round(e / res)) for e in box.hi - box.lo)


def _f1(X):
    return sign_labels(_col(X))


def _f2(X):
    x = _col(X)
    lab = sign_labels(x)
    flip = (x == 0.5) | (x == -0.5)
    return np.where(flip, np.where(lab == POS, NEG, POS), lab)


def _on_lattice(x):
    y = x * _SCALE
    return np.floor(y) == y


def _f3(X):
    x = _col(X)
    lab = sign_labels(x)
    return np.where(_on_lattice(x), lab, np.where(lab == POS, NEG, POS))


def _f3_candidates(X):
    x = _col(X)
    y = x * _SCALE
    return np.stack([np.floor(y) / _SCALE, np.ceil(y) / _SCALE,
                     np.nextafter(x, -np.inf), np.nextafter(x, np.inf)], axis=1)[:, :, None]


def _f4(X):
    return sign_labels(_col(X) + 0.5)


def _step_at(t):
    def fn(X):
        return np.where(_col(X) >= t, 2, 1)
    return fn


def _step_gap(X):
    return np.where(_col(X) > 0, 2, 1)


class _DiskLabels:
    def __init__(self, r):
        self.r = r

    def __call__(self, X):
        return np.where(np.linalg.norm(np.asarray(X, float), axis=1) <= self.r, 1, 2)


def _params(spec):
    out = {}
    if not spec:
        return out
    for part in spec.split(","):
        k, _, v = part.partition("=")
        out[k.strip()] = float(v)
    return out


def make_f1():
    box = Box([-1.0], [1.0])
    return GridField.from_function(_f1, box, _counts(box, _1D_RES))


def make_f2(resolution=_1D_RES):
    return OracleField(_f2, Box([-1.0], [1.0]), (POS, NEG), resolution=resolution,
                       candidates=[[-0.5], [0.5]])


def make_f3_analog(resolution=1e-3):
    return OracleField(_f3, Box([-1.0], [1.0]), (POS, NEG), resolution=resolution,
                       candidates=_f3_candidates)


def make_f4():
    box = Box([-1.0], [1.0])
    return GridField.from_function(_f4, box, _counts(box, _1D_RES))


def make_H1(eps=0.01):
    dom = BoxUnion((Box([-1.0], [-eps]), Box([eps], [1.0])))
    return OracleField(_step_gap, dom, (1, 2), resolution=_1D_RES)


def make_H2(eps=0.01):
    return relabel(make_H1(eps), {1: 1, 2: 1001})


def make_H3(eps=0.01):
    return rescale_domain(make_H1(eps), 1e-3)


def make_f_l():
    box = Box([0.0], [2.0])
    return GridField.from_function(_step_at(1.0), box, _counts(box, _1D_RES))


def make_cube(n=1, a=1.0):
    return OracleField(lambda X: np.ones(len(X), dtype=np.int64), Box.cube(int(n), a), (1,))


def make_ball(n=1, R=1.0):
    return OracleField(lambda X: np.ones(len(X), dtype=np.int64), Ball.centered(int(n), R), (1,))


def make_disk_in_square(r=0.5, res=0.01):
    box = Box([-1.0, -1.0], [1.0, 1.0])
    return GridField.from_function(_DiskLabels(r), box, _counts(box, res))


CATALOG = {
    "f1": (make_f1, "sgn(x) on [-1, 1]"),
    "f2": (make_f2, "sgn(x) with flipped labels at x = +-1/2"),
    "f3-analog": (make_f3_analog, "sgn(x) on the dyadic lattice 2^-24 Z, -sgn(x) elsewhere"),
    "f4": (make_f4, "sgn(x + 1/2) on [-1, 1]"),
    "H1": (make_H1, "step {1, 2} on [-1, -eps] u [eps, 1] (eps=0.01)"),
    "H2": (make_H2, "H1 relabelled to {1, 1001}"),
    "H3": (make_H3, "H1 with inputs scaled by 1/1000"),
    "f_l": (make_f_l, "step at x = 1 on [0, 2]"),
    "cube": (make_cube, "constant 1 on the cube [-a, a]^n (cube:n=2,a=1)"),
    "ball": (make_ball, "constant 1 on the Euclidean ball of radius R (ball:n=2,R=1)"),
    "disk-in-square": (make_disk_in_square, "1 inside the disk |x| <= r, 2 elsewhere in [-1, 1]^2"),
}
_ALIASES = {"f3": "f3-analog", "disk": "disk-in-square"}


def builtin_field(name: str):
    """Build a catalog field; ``name`` may carry parameters, e.g. ``"cube:n=2,a=1"``."""
    key, _, spec = name.partition(":")
    key = _ALIASES.get(key.strip(), key.strip())
    if key not in CATALOG:
        listing = ", ".join(sorted(CATALOG))
        raise KeyError(f"unknown field {name!r}; catalog: {listing}")
    params = _params(spec)
    return CATALOG[key][0](**params)
