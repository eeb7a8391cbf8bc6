import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from classtab.construct import HField, class_prediction, compose_G, omega
from classtab.distance import boundary_distances
from classtab.domains import Ball, Box, NormP, lp_norm
from classtab.fields import GridField, PointCloud, relabel, rescale_domain
from classtab.stability import volume_matched_ratio

coords = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
p_values = st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf])


@given(arrays(float, (3, 4), elements=coords), p_values)
def test_norm_triangle(v, p):
    nrm = NormP(p)
    x, y, z = v
    assert nrm.distance(x, z) <= (nrm.distance(x, y) + nrm.distance(y, z)) * (1 + 1e-12) + 1e-300


@given(arrays(float, 5, elements=coords), st.floats(1.0, 8.0), st.floats(1.0, 8.0))
def test_norm_order(v, p, q):
    lo, hi = sorted((p, q))
    assert lp_norm(v, hi) <= lp_norm(v, lo) * (1 + 1e-12) + 1e-300


@given(st.integers(1, 12), st.integers(1, 12))
def test_compose_g_integer_rounding(q, k):
    k = min(k, q)
    assert class_prediction(compose_G(float(k), q)) == k


@given(st.integers(1, 6), st.floats(-2, 10, allow_nan=False))
def test_omega_range(i, x):
    w = omega(i, x)
    assert 0.0 <= w <= 1.0
    if abs(x - i) >= 1:
        assert w == 0.0


@given(arrays(float, st.integers(1, 8), elements=st.floats(-5, 5, allow_nan=False)))
def test_class_prediction_is_first_max(v):
    k = class_prediction(v)
    assert v[k - 1] == v.max() and np.all(v[:k - 1] < v.max())


@given(st.integers(1, 64))
def test_ratio_increasing(n):
    assert volume_matched_ratio(n + 1) > volume_matched_ratio(n)


def _cloud(seed, n=40, d=2, k=3):
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(-1, 1, size=(n, d)), rng.integers(1, k + 1, size=n))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), p_values)
def test_point_cloud_distance_is_brute_force(seed, p):
    pc = _cloud(seed)
    P, y = pc.points_, pc.labels_
    h, _, _ = boundary_distances(pc, P, p, boundary_mode="interior")
    for i in range(len(P)):
        other = P[y != y[i]]
        want = lp_norm(other - P[i], p).min() if len(other) else math.inf
        assert h[i] == want or abs(h[i] - want) <= 1e-12 * want


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_h_within_class_lipschitz_on_grid(seed):
    rng = np.random.default_rng(seed)
    g = GridField(Box([0.0, 0.0], [1.0, 1.0]), (6, 6), rng.integers(1, 4, size=36))
    H = HField(g, 2.0, "extension")
    X = rng.uniform(-0.2, 1.2, size=(200, 2))
    Y = rng.uniform(-0.2, 1.2, size=(200, 2))
    gap = np.linalg.norm(X - Y, axis=1)
    assert np.all(np.abs(H(X) - H(Y)).max(axis=1) <= gap * (1 + 1e-9) + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.permutations([1, 2, 3]))
def test_relabel_round_trip(seed, perm):
    pc = _cloud(seed)
    m = dict(zip([1, 2, 3], [p + 10 for p in perm]))
    present = {k: v for k, v in m.items() if k in pc.label_set}
    back = relabel(relabel(pc, present), {v: k for k, v in present.items()})
    assert np.array_equal(back.predict(pc.points_), pc.predict(pc.points_))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(1e-3, 1e3))
def test_rescale_scales_distance(seed, c):
    pc = _cloud(seed)
    h, _, _ = boundary_distances(pc, pc.points_, 2.0, boundary_mode="interior")
    hc, _, _ = boundary_distances(rescale_domain(pc, c), pc.points_ * c, 2.0, boundary_mode="interior")
    fin = np.isfinite(h)
    assert np.allclose(hc[fin], c * h[fin], rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10 ** 6), p_values)
def test_ball_samples_inside(n, seed, p):
    b = Ball.centered(n, 0.7)
    X = b.sample(seed, 500)
    assert b.contains(X).all()
    assert np.all(b.complement_distance(X, 2.0) >= 0)
