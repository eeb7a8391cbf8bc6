import math

import numpy as np
import pytest

from classtab.domains import Ball, Box, BoxUnion, FiniteSet, NormP, check_p, lp_norm, unit_ball_sample


def test_box_volume_and_validation():
    b = Box([0.0, -1.0], [2.0, 3.0])
    assert b.volume() == pytest.approx(8.0)
    with pytest.raises(ValueError):
        Box([0.0, 1.0], [1.0, 1.0])


def test_ball_volume_formula():
    for n in range(1, 7):
        want = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * 1.5 ** n
        assert Ball.centered(n, 1.5).volume() == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("domain", [
    Box([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0]),
    Ball.centered(3, 0.7),
    BoxUnion((Box([-1.0], [-0.01]), Box([0.01], [1.0]))),
    FiniteSet(np.array([[0.0, 1.0], [2.0, 3.0]])),
])
def test_samples_are_members(domain, rng):
    X = domain.sample(rng, 5000)
    assert domain.contains(X).all()


def test_check_p():
    assert check_p("inf") == math.inf
    assert check_p(1) == 1.0
    with pytest.raises(ValueError):
        check_p(0.5)


def test_lp_norm_values():
    v = np.array([3.0, -4.0])
    assert lp_norm(v, 1.0) == 7.0
    assert lp_norm(v, 2.0) == 5.0
    assert lp_norm(v, math.inf) == 4.0
    assert lp_norm(v, 3.0) == pytest.approx((27 + 64) ** (1 / 3))


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0, math.inf])
def test_normp_triangle_inequality(p, rng):
    nrm = NormP(p)
    x, y, z = rng.normal(size=(3, 500, 4))
    assert np.all(nrm.distance(x, x) == 0)
    lhs = nrm.distance(x, z)
    rhs = nrm.distance(x, y) + nrm.distance(y, z)
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, math.inf])
def test_unit_ball_sample_inside_and_spread(p, rng):
    U = unit_ball_sample(rng, 20000, 3, p)
    r = lp_norm(U, p)
    assert r.max() <= 1.0 + 1e-12
    # uniform in the ball: P(r <= 1/2) = 2^-d
    assert np.mean(r <= 0.5) == pytest.approx(1 / 8, abs=0.01)


def test_box_complement_and_distance_to():
    b = Box([0.0, 0.0], [1.0, 2.0])
    X = np.array([[0.25, 1.0], [0.5, 0.1]])
    assert np.allclose(b.complement_distance(X, 2.0), [0.25, 0.1])
    Y = np.array([[2.0, 1.0], [-3.0, -4.0]])
    assert np.allclose(b.distance_to(Y, 2.0), [1.0, 5.0])
    assert np.allclose(b.distance_to(Y, 1.0), [1.0, 7.0])


def test_ball_complement_distance_other_norms():
    b = Ball.centered(2, 1.0)
    x = np.array([[0.0, 0.0]])
    # largest inscribed l_inf ball in the unit disk has radius 1/sqrt(2)
    assert b.complement_distance(x, math.inf)[0] == pytest.approx(1 / math.sqrt(2), rel=1e-6)
    assert b.complement_distance(x, 1.0)[0] == pytest.approx(1.0, rel=1e-6)


def test_project_lands_inside(rng):
    for dom in (Box([-1.0, -1.0], [1.0, 1.0]), Ball.centered(2, 1.0),
                BoxUnion((Box([-1.0], [-0.01]), Box([0.01], [1.0])))):
        X = rng.normal(scale=3.0, size=(1000, dom.dim))
        assert dom.contains(dom.project(X)).all()


def test_scaled_box():
    b = Box.cube(2, 1.0).scaled(0.5)
    assert np.allclose(b.lo, [-0.5, -0.5]) and np.allclose(b.hi, [0.5, 0.5])
