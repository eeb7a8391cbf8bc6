import math

import numpy as np
import pytest

from classtab.catalog import builtin_field
from classtab.construct import HField, class_prediction, stable_set
from classtab.domains import Box
from classtab.nn import (
    MLP,
    ShallowNet,
    certified_sup_error,
    eval_net,
    load_net,
    net_as_field,
    save_net,
    stability_of_net,
    train_narrow_deep,
    train_shallow,
    verify_net,
)


@pytest.fixture(scope="module")
def f1_net():
    return train_shallow(builtin_field("f1"), p=2, epsilon=0.2, width=64, seed=0)


def _random_net(rng, dims, activation="relu"):
    W = [rng.normal(size=(o, i)) for i, o in zip(dims[:-1], dims[1:])]
    b = [rng.normal(size=o) for o in dims[1:]]
    return MLP(W, b, activation)


def test_zero_weights_return_output_bias():
    net = ShallowNet([np.zeros((4, 2)), np.zeros((3, 4))], [np.zeros(4), np.array([1.0, -2.0, 0.5])])
    assert eval_net(net, [0.3, -0.7]) == pytest.approx([1.0, -2.0, 0.5])


def test_eval_net_shapes_and_mismatch(rng):
    net = _random_net(rng, [2, 5, 3])
    assert eval_net(net, [0.0, 1.0]).shape == (3,)
    assert eval_net(net, np.zeros((7, 2))).shape == (7, 3)
    with pytest.raises(ValueError):
        eval_net(net, np.zeros((4, 3)))


def test_constructor_validation():
    with pytest.raises(ValueError):
        MLP([np.zeros((3, 2)), np.zeros((2, 4))], [np.zeros(3), np.zeros(2)])
    with pytest.raises(ValueError):
        MLP([np.zeros((3, 2))], [np.zeros(3)], activation="cubic")
    with pytest.raises(ValueError):
        ShallowNet([np.zeros((3, 2))], [np.zeros(3)])


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid"])
def test_gradients_match_finite_differences(activation, rng):
    net = _random_net(rng, [3, 6, 5, 2], activation)
    X = rng.normal(size=(8, 3))
    dout = rng.normal(size=(8, 2))
    gW, gb = net.gradients(X, dout)
    h = 1e-6
    for k in range(3):
        for idx in [(0, 0), (1, 2)]:
            w = net.weights[k]
            if idx[0] >= w.shape[0] or idx[1] >= w.shape[1]:
                continue
            old = w[idx]
            w[idx] = old + h
            up = np.sum(dout * net.forward(X))
            w[idx] = old - h
            dn = np.sum(dout * net.forward(X))
            w[idx] = old
            assert gW[k][idx] == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-6)
        b = net.biases[k]
        old = b[0]
        b[0] = old + h
        up = np.sum(dout * net.forward(X))
        b[0] = old - h
        dn = np.sum(dout * net.forward(X))
        b[0] = old
        assert gb[k][0] == pytest.approx((up - dn) / (2 * h), rel=1e-4, abs=1e-6)


def test_save_load_round_trip(tmp_path, rng):
    for dims in ([2, 5, 3], [1, 4, 4, 2]):
        net = _random_net(rng, dims, "tanh")
        path = tmp_path / "net.json"
        save_net(net, path)
        back = load_net(path)
        assert back.identical(net)
        assert isinstance(back, ShallowNet) == (len(dims) == 3)


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid"])
def test_certificate_bounds_sampled_error(activation, rng):
    net = _random_net(rng, [2, 16, 3], activation)
    H = HField(builtin_field("disk-in-square"), 2.0, "extension")
    K = Box([-1.1, -1.1], [1.1, 1.1])
    bound = certified_sup_error(net, H, K, 0.05, p=2.0)
    X = rng.uniform(-1.1, 1.1, size=(20000, 2))
    assert np.abs(net.forward(X) - H(X)).max() <= bound


def test_certificate_bounds_deep_net(rng):
    net = _random_net(rng, [1, 6, 6, 3])
    H = HField(builtin_field("f1"), 2.0, "extension")
    K = Box([-1.2], [1.2])
    bound = certified_sup_error(net, H, K, 0.01, p=2.0)
    X = np.linspace(-1.2, 1.2, 100001)[:, None]
    assert np.abs(net.forward(X) - H(X)).max() <= bound


def test_train_shallow_f1(f1_net):
    net, rep = f1_net
    assert rep.success and rep.sup_error < 0.1
    assert rep.interpolation_fraction == 1.0 and rep.stable_points > 0
    assert rep.slots == [-1, 1, 2]
    assert class_prediction(eval_net(net, [0.5])) == 2


def test_interpolation_asserted_on_stable_grid(f1_net):
    net, rep = f1_net
    field = builtin_field("f1")
    S = stable_set(field, 0.2, p=2, resolution=0.005)
    H = HField(field)
    assert np.array_equal(class_prediction(eval_net(net, S.members)), H.slot_of(S.labels) + 1)


def test_retraining_is_bitwise_deterministic(f1_net):
    net, _ = f1_net
    again, _ = train_shallow(builtin_field("f1"), p=2, epsilon=0.2, width=64, seed=0)
    assert again.identical(net)


def test_vacuous_when_epsilon_exceeds_domain():
    with pytest.warns(RuntimeWarning, match="empty"):
        _, rep = train_shallow(builtin_field("f1"), epsilon=3.0, width=16, budget=50, seed=0)
    assert rep.vacuous and rep.interpolation_fraction == 1.0


def test_train_tanh_f1():
    _, rep = train_shallow(builtin_field("f1"), epsilon=0.2, activation="tanh", width=64, seed=1)
    assert rep.success


def test_narrow_deep_f1_width():
    net, rep = train_narrow_deep(builtin_field("f1"), epsilon=0.2, depth_budget=4, seed=0)
    assert rep.success and rep.interpolation_fraction == 1.0
    assert net.width == 1 + 3 + 2


def test_narrow_deep_failure_is_flagged():
    net, rep = train_narrow_deep(builtin_field("f1"), epsilon=0.01, depth_budget=2, budget=20, seed=0,
                                 resolution=0.01)
    assert not rep.success and net.width == 6


def test_narrow_deep_relu_only():
    with pytest.raises(ValueError):
        train_narrow_deep(builtin_field("f1"), activation="tanh")


def test_point_cloud_training_rejected():
    from classtab.fields import PointCloud
    pc = PointCloud(np.array([[0.0], [1.0]]), [1, 2])
    with pytest.raises(ValueError):
        train_shallow(pc, epsilon=0.2)


def test_verify_net_reproduces_certificate(f1_net):
    net, rep = f1_net
    again = verify_net(net, builtin_field("f1"), epsilon=0.2)
    assert again.success and again.sup_error == pytest.approx(rep.sup_error)
    with pytest.raises(ValueError):
        verify_net(net, builtin_field("disk-in-square"), epsilon=0.2)


def test_net_as_field_labels(f1_net):
    net, rep = f1_net
    nf = net_as_field(net, builtin_field("f1").domain, rep.slots)
    assert nf.predict(np.array([[-0.6], [0.6]])).tolist() == [2, 1]


def test_stability_of_interior_net():
    field = builtin_field("f1")
    net, rep = train_shallow(field, epsilon=0.2, width=64, seed=0, boundary_mode="interior")
    assert rep.success
    est = stability_of_net(net, field.domain, rep.slots, p=1, boundary_mode="interior",
                           samples=10 ** 5, seed=0)
    assert est.value == pytest.approx(1.0, abs=0.05)
