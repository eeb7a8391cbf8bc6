import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from classtab.estimators import BoundaryDistanceTransformer, HFieldTransformer, StableNetClassifier


@pytest.fixture
def two_blobs(rng):
    X = np.vstack([rng.normal(-1, 0.3, size=(60, 2)), rng.normal(1, 0.3, size=(60, 2))])
    y = np.repeat([1, 2], 60)
    return X, y


def test_hfield_transformer(two_blobs):
    X, y = two_blobs
    t = HFieldTransformer(boundary_mode="interior").fit(X, y)
    V = t.transform(X)
    assert V.shape == (120, 3)
    assert t.get_feature_names_out().tolist() == ["h_label_-1", "h_label_1", "h_label_2"]
    # every sample sits on its own label, at positive distance
    assert np.all(np.argmax(V, axis=1) == np.where(y == 1, 1, 2))


def test_transformer_validation(two_blobs):
    X, y = two_blobs
    with pytest.raises(NotFittedError):
        HFieldTransformer().transform(X)
    t = HFieldTransformer().fit(X, y)
    with pytest.raises(ValueError):
        t.transform(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        HFieldTransformer().fit(X, y + 0.5)


def test_params_and_clone():
    est = StableNetClassifier(epsilon=0.2, width=32)
    params = est.get_params()
    assert params["epsilon"] == 0.2 and params["width"] == 32
    c = clone(est).set_params(width=16)
    assert c.width == 16 and est.width == 32


def test_boundary_distance_in_pipeline(two_blobs):
    X, y = two_blobs
    pipe = make_pipeline(BoundaryDistanceTransformer(boundary_mode="interior")).fit(X, y)
    d = pipe.transform(X)
    assert d.shape == (120, 1) and np.all(d > 0)


def test_stable_net_classifier(two_blobs):
    X, y = two_blobs
    clf = StableNetClassifier(epsilon=0.1, width=128, budget=100, random_state=0).fit(X, y)
    assert clf.classes_.tolist() == [1, 2]
    assert set(np.unique(clf.predict(X))) <= {1, 2}
    assert clf.score(X, y) >= 0.95
    assert clf.decision_function(X).shape == (120, 2)
