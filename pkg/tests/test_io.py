import numpy as np
import pytest

from classtab.domains import Box
from classtab.fields import GridField, PointCloud
from classtab.io import load_field, read_grid, read_point_cloud, save_field


def test_point_cloud_round_trip_bit_exact(tmp_path, rng):
    X = rng.normal(size=(50, 3)) * 1e-7 + rng.normal(size=(50, 3))
    pc = PointCloud(X, rng.integers(1, 4, size=50))
    path = tmp_path / "cloud.csv"
    save_field(pc, path)
    back = load_field(path)
    assert isinstance(back, PointCloud)
    assert np.array_equal(back.points_, pc.points_)
    assert np.array_equal(back.labels_, pc.labels_)


def test_grid_round_trip(tmp_path, rng):
    g = GridField(Box([-1.0, 0.0, 0.5], [1.0, 0.25, 2.0]), (3, 4, 5), rng.integers(1, 5, size=60))
    path = tmp_path / "grid.txt"
    save_field(g, path)
    back = load_field(path)
    assert isinstance(back, GridField)
    assert back.resolution == g.resolution
    assert np.array_equal(back.labels, g.labels)
    assert np.array_equal(back.box.lo, g.box.lo) and np.array_equal(back.box.hi, g.box.hi)
    C = g.cell_centers()
    assert np.array_equal(back.predict(C), g.predict(C))


def test_point_cloud_from_text():
    pc = read_point_cloud("x_1,label\n0.0,1\n1.0,2\n")
    assert pc.predict(np.array([[0.9]])).tolist() == [2]


@pytest.mark.parametrize("text", ["", "x_1,y\n0,1\n", "x_1,label\n", "x_1,label\n0,1,3\n"])
def test_point_cloud_rejections(text):
    with pytest.raises(ValueError):
        read_point_cloud(text)


def test_grid_rejections():
    with pytest.raises(ValueError):
        read_grid('{"dim": 1, "lo": [0], "hi": [1], "resolution": [3]}\n1,2\n')
    with pytest.raises(ValueError):
        read_grid('{"dim": 1, "lo": [0], "hi": [1], "resolution": [2], "label_set": [1]}\n1,2\n')
    with pytest.raises(ValueError):
        read_grid('{"dim": 1, "lo": [0], "hi": [1]}\n1,2\n')


def test_save_rejects_oracle(tmp_path):
    from classtab.fields import OracleField
    f = OracleField(lambda X: np.ones(X.shape[0], dtype=int), Box([0.0], [1.0]), (1,))
    with pytest.raises(ValueError):
        save_field(f, tmp_path / "x")
