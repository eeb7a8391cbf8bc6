"""scikit-learn style wrappers around the functional core.

Each estimator fits on labelled samples ``(X, y)``: the samples become a
point-cloud field whose label at any query point is that of its nearest
sample.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .construct import HField, class_prediction
from .domains import Box
from .fields import GridField, PointCloud
from .nn import eval_net, train_shallow

__all__ = ["BoundaryDistanceTransformer", "HFieldTransformer", "StableNetClassifier"]


def _cloud(X, y):
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    if not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError("labels must be integers")
    return PointCloud(X, y.astype(np.int64))


class HFieldTransformer(TransformerMixin, BaseEstimator):
    """Map points to the H vector of the fitted point cloud.

    Parameters
    ----------
    p : float or "inf", default=2.0
        Norm used for distances.
    boundary_mode : {"extension", "interior"}, default="extension"
        Whether the edge of the samples' bounding box counts as a boundary.
    """

    def __init__(self, p=2.0, boundary_mode="extension"):
        self.p = p
        self.boundary_mode = boundary_mode

    def fit(self, X, y):
        self.field_ = _cloud(X, y)
        self.h_field_ = HField(self.field_, self.p, self.boundary_mode)
        self.slots_ = np.asarray(self.h_field_.slots)
        self.n_features_in_ = self.field_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "h_field_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.h_field_(X)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "slots_")
        return np.array([f"h_label_{int(s)}" for s in self.slots_], dtype=object)


class BoundaryDistanceTransformer(HFieldTransformer):
    """Map points to their pointwise distance to the decision boundary, shape (n, 1)."""

    def transform(self, X):
        return super().transform(X).max(axis=1, keepdims=True)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "slots_")
        return np.array(["boundary_distance"], dtype=object)


class StableNetClassifier(ClassifierMixin, BaseEstimator):
    """One-hidden-layer network trained to reproduce the H field of the samples.

    The samples' nearest-neighbour labelling is rasterised on a grid over
    their bounding box and the net is fitted to that grid's H field. The
    prediction is the label of the largest output among the sample labels;
    the outside-the-domain slot is ignored. ``report_`` holds the certified
    sup-norm error and the interpolation fraction on the epsilon-stable grid.
    """

    def __init__(self, epsilon=0.1, width=256, activation="relu", p=2.0, budget=500,
                 resolution=None, random_state=0):
        self.epsilon = epsilon
        self.width = width
        self.activation = activation
        self.p = p
        self.budget = budget
        self.resolution = resolution
        self.random_state = random_state

    def fit(self, X, y):
        cloud = _cloud(X, y)
        lo, hi = cloud.domain.bounding_box()
        box = Box(lo, hi)
        per_axis = min(200, int(40000 ** (1.0 / cloud.dim)))
        # H of a point cloud jumps across Voronoi faces; its grid raster is 1-Lipschitz
        field = GridField.from_function(cloud.predict, box, (per_axis,) * cloud.dim)
        seed = 0 if self.random_state is None else int(self.random_state)
        self.net_, self.report_ = train_shallow(field, p=self.p, epsilon=self.epsilon,
                                                activation=self.activation, width=self.width,
                                                budget=self.budget, seed=seed,
                                                resolution=self.resolution)
        self.slots_ = np.asarray(self.report_.slots)
        self.classes_ = np.asarray(cloud.label_set)
        self.n_features_in_ = field.dim
        return self

    def decision_function(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        out = eval_net(self.net_, X)
        return out[:, self.slots_ >= 1]

    def predict(self, X):
        labels = self.slots_[self.slots_ >= 1]
        return labels[class_prediction(self.decision_function(X)) - 1]
