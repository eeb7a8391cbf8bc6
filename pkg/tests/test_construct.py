import numpy as np
import pytest

from classtab.catalog import builtin_field
from classtab.construct import (
    HField,
    class_prediction,
    compose_G,
    empirical_lipschitz,
    h_field,
    lipschitz_check_H,
    omega,
    stable_set,
)
from classtab.domains import Box
from classtab.fields import OracleField, relabel


@pytest.mark.parametrize("v,expected", [((0.1, 0.9, 0.3), 2), ((0.5, 0.5), 1), ((-1, -1, -1), 1)])
def test_class_prediction(v, expected):
    assert class_prediction(np.array(v)) == expected


def test_class_prediction_batch_and_empty():
    assert class_prediction(np.array([[0, 1.0], [2.0, 1.0]])).tolist() == [2, 1]
    with pytest.raises(ValueError):
        class_prediction(np.array([]))


def test_slot_order_and_mapping():
    H = HField(builtin_field("f1"), 2.0, "interior")
    assert H.slots == (-1, 1, 2)
    assert H.mapping() == {-1: 1, 1: 2, 2: 3}


def test_h_field_examples():
    v = h_field(builtin_field("f1"), [0.5], p=2, boundary_mode="interior")
    assert v == pytest.approx([0.0, 0.5, 0.0], abs=1e-4)
    assert np.all(h_field(builtin_field("f1"), [0.0], boundary_mode="interior") == 0)
    v = h_field(builtin_field("cube:n=2,a=1"), [0.0, 0.0], boundary_mode="extension")
    assert v == pytest.approx([0.0, 1.0], abs=1e-12)


def test_h_field_outside_domain():
    H = HField(builtin_field("f1"), 2.0, "extension")
    v = H(np.array([[1.5]]))
    assert v[0] == pytest.approx([0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        HField(builtin_field("f1"), 2.0, "interior")(np.array([[1.5]]))


@pytest.mark.parametrize("name", ["f1", "f4", "cube", "disk-in-square"])
def test_lipschitz_check(name):
    ratio, _ = lipschitz_check_H(builtin_field(name), p=2, pair_count=2 * 10 ** 4, seed=1)
    assert ratio <= 1 + 1e-9


def test_lipschitz_ratio_one_attained_in_1d():
    H = HField(builtin_field("f1"), 2.0, "interior")
    a, b = H(np.array([[0.2], [0.4]]))
    assert np.abs(a - b).max() / 0.2 == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name,lower", [("H1", 50.0), ("H2", 50000.0), ("H3", 50000.0)])
def test_empirical_lipschitz_contrast(name, lower):
    assert empirical_lipschitz(builtin_field(name), 2 * 10 ** 4, seed=0) >= lower * (1 - 1e-12)


def test_empirical_lipschitz_constant_field():
    const = OracleField(lambda X: np.ones(X.shape[0], dtype=int), Box([0.0], [1.0]), (1,))
    assert empirical_lipschitz(const, 1000) == 0.0


def test_stable_set_f1():
    S = stable_set(builtin_field("f1"), 0.1, p=1, boundary_mode="interior", resolution=1e-3)
    x = S.members[:, 0]
    assert np.all(np.abs(x) > 0.1) and np.abs(x).min() < 0.102
    assert x.max() > 0.99 and x.min() < -0.99


def test_stable_set_f_l():
    S = stable_set(builtin_field("f_l"), 0.25, p=1, boundary_mode="interior", resolution=1e-3)
    x = S.members[:, 0]
    left, right = x[x < 1], x[x > 1]
    assert left.max() < 0.75 and left.max() > 0.745
    assert right.min() > 1.25 and right.min() < 1.255
    assert np.array_equal(S.labels, np.where(x < 1, 1, 2))


def test_stable_set_empty_warns():
    with pytest.warns(RuntimeWarning):
        S = stable_set(builtin_field("f1"), 5.0, boundary_mode="interior", resolution=0.01)
    assert S.empty and len(S) == 0


def test_stable_set_nesting():
    disk = builtin_field("disk-in-square")
    small = stable_set(disk, 0.05, resolution=0.02)
    big = stable_set(disk, 0.15, resolution=0.02)
    assert big.key_set() <= small.key_set() and len(big) < len(small)


@pytest.mark.parametrize("i,x,expected", [(3, 3.0, 1.0), (3, 2.5, 0.5), (3, 4.2, 0.0)])
def test_omega(i, x, expected):
    assert omega(i, x) == pytest.approx(expected)


def test_compose_g_examples():
    assert compose_G(2.0, 3) == pytest.approx([0, 1, 0])
    v = compose_G(2.5, 3)
    assert v == pytest.approx([0, 0.5, 0.5]) and class_prediction(v) == 2
    assert compose_G(0.0, 3) == pytest.approx([0, 0, 0])


@pytest.mark.parametrize("q", [1, 2, 5, 9])
def test_compose_g_rounds_integers(q):
    for k in range(1, q + 1):
        assert class_prediction(compose_G(float(k), q)) == k


def test_prediction_partition_survives_relabel(rng):
    f = builtin_field("disk-in-square")
    g = relabel(f, {1: 5, 2: 3})
    X = f.domain.sample(rng, 2000)
    Hf, Hg = HField(f), HField(g)
    pf = np.asarray(Hf.slots)[class_prediction(Hf(X)) - 1]
    pg = np.asarray(Hg.slots)[class_prediction(Hg(X)) - 1]
    keep = Hf.distances(X)[0] > 10 * Hf.error_bound
    assert np.array_equal(pf[keep] == 1, pg[keep] == 5)
