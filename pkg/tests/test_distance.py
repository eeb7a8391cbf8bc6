import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from classtab.catalog import builtin_field
from classtab.distance import boundary_distances, distance_profile, measure_distance, pointwise_distance
from classtab.domains import Box
from classtab.fields import GridField, PointCloud


@pytest.mark.parametrize("name,x,p,mode,expected", [
    ("f1", 0.3, 1, "interior", 0.3),
    ("f1", 0.9, 1, "extension", 0.1),
    ("f2", 0.4, 1, "interior", 0.1),
    ("cube:n=1,a=1", 0.25, 1, "extension", 0.75),
])
def test_pointwise_examples(name, x, p, mode, expected):
    est = pointwise_distance(builtin_field(name), [x], p=p, boundary_mode=mode)
    assert est.value == pytest.approx(expected, abs=est.error_bound + 1e-12)
    assert est.mode == "pointwise" and est.boundary_mode == mode


def test_pointwise_outside_domain_rejected():
    with pytest.raises(ValueError):
        pointwise_distance(builtin_field("f1"), [1.5])


def test_measure_mode_on_point_cloud_rejected():
    pc = PointCloud(np.array([[0.0], [1.0]]), [1, 2])
    with pytest.raises(ValueError):
        measure_distance(pc, [0.2])


def test_measure_tau_range():
    with pytest.raises(ValueError):
        measure_distance(builtin_field("f1"), [0.2], tau=0.5)


@pytest.mark.parametrize("name,x,mode,expected", [
    ("f2", 0.45, "interior", 0.45),
    ("f1", 0.3, "interior", 0.3),
    ("cube:n=1,a=1", 0.0, "extension", 1.0),
])
def test_measure_examples(name, x, mode, expected):
    est = measure_distance(builtin_field(name), [x], p=1, boundary_mode=mode)
    assert est.value == pytest.approx(expected, abs=0.01)
    assert est.method == "radius_bisection"


def test_measure_saturates_on_constant_interior():
    est = measure_distance(builtin_field("cube:n=1,a=1"), [0.0], p=1, boundary_mode="interior")
    assert est.saturated and est.value == pytest.approx(2.0)


def test_profile_examples():
    f1 = builtin_field("f1")
    vals = [e.value for e in distance_profile(f1, [[-0.5], [0.5]], p=1, boundary_mode="interior")]
    assert vals == pytest.approx([0.5, 0.5], abs=1e-4)
    f4 = builtin_field("f4")
    vals = [e.value for e in distance_profile(f4, [[-0.75], [0.75]], p=1, boundary_mode="interior")]
    assert vals == pytest.approx([0.25, 1.25], abs=1e-4)
    assert distance_profile(f1, []) == []


def test_profile_matches_single_point_measure():
    f4 = builtin_field("f4")
    pts = [[-0.9], [0.2], [0.7]]
    batch = distance_profile(f4, pts, mode="measure", boundary_mode="interior", seed=3)
    for i, x in enumerate(pts):
        single = measure_distance(f4, x, boundary_mode="interior", seed=3, index=i)
        assert single.value == batch[i].value


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
def test_point_cloud_matches_brute_force(p, rng):
    P = rng.uniform(-1, 1, size=(300, 2))
    labels = 1 + (rng.random(300) < 0.4).astype(int)
    pc = PointCloud(P, labels)
    X = P[:50]
    got, eb, _ = boundary_distances(pc, X, p, boundary_mode="interior")
    D = cdist(X, P, "chebyshev" if p == math.inf else "minkowski", **({} if p == math.inf else {"p": p}))
    D[labels[:50, None] == labels[None, :]] = np.inf
    assert np.all(eb == 0)
    assert np.allclose(got, D.min(axis=1), rtol=1e-12, atol=0)


def test_no_competitor_gives_inf():
    pc = PointCloud(np.array([[0.0], [1.0]]), [1, 1])
    assert pointwise_distance(pc, [0.0], boundary_mode="interior").value == math.inf


def test_extension_le_interior(rng):
    for name in ("f1", "f4", "disk-in-square"):
        f = builtin_field(name)
        X = f.domain.sample(rng, 3000)
        ext, _, _ = boundary_distances(f, X, 2, boundary_mode="extension")
        inn, _, _ = boundary_distances(f, X, 2, boundary_mode="interior")
        assert np.all(ext <= inn)


def test_measure_ge_pointwise_on_grid(rng):
    g = GridField.from_function(lambda C: np.where(np.hypot(C[:, 0], C[:, 1]) < 0.5, 1, 2),
                                Box([-1.0, -1.0], [1.0, 1.0]), 80)
    X = g.domain.sample(rng, 40)
    pw, eb, _ = boundary_distances(g, X, 2, "pointwise", "interior")
    ms, _, _ = boundary_distances(g, X, 2, "measure", "interior", samples_per_radius=1024, seed=1)
    assert np.all(ms >= pw - eb)


def test_within_class_lipschitz(rng):
    f = builtin_field("disk-in-square")
    X = f.domain.sample(rng, 4000)
    Y = np.clip(X + rng.normal(scale=0.05, size=X.shape), -1, 1)
    same = f.predict(X) == f.predict(Y)
    hx, eb, _ = boundary_distances(f, X[same], 2, boundary_mode="interior")
    hy, _, _ = boundary_distances(f, Y[same], 2, boundary_mode="interior")
    gap = np.linalg.norm(X[same] - Y[same], axis=1)
    assert np.all(np.abs(hx - hy) <= gap + 2 * eb + 1e-12)


def test_estimate_to_dict_and_validation():
    d = pointwise_distance(builtin_field("f1"), [0.5]).to_dict()
    assert set(d) >= {"value", "method", "error_bound", "mode", "boundary_mode"}
    from classtab.distance import DistanceEstimate
    with pytest.raises(ValueError):
        DistanceEstimate(-1.0, "grid_scan", 0.0, "pointwise", "interior")
