"""Class stability of classification functions and stable network interpolants."""

__version__ = "0.1.0"

from .catalog import builtin_field
from .construct import HField, StableSet, class_prediction, compose_G, h_field, lipschitz_check_H, omega, stable_set
from .distance import DistanceEstimate, boundary_distances, distance_profile, measure_distance, pointwise_distance
from .domains import Ball, Box, BoxUnion, FiniteSet
from .estimators import BoundaryDistanceTransformer, HFieldTransformer, StableNetClassifier
from .fields import GridField, OracleField, PointCloud, relabel, rescale_domain
from .io import load_field, save_field
from .nn import (
    MLP,
    ShallowNet,
    eval_net,
    load_net,
    rounding_chain,
    save_net,
    train_narrow_deep,
    train_shallow,
    verify_net,
)
from .reproduce import reproduce_paper
from .stability import (
    StabilityEstimate,
    accuracy_measure,
    ball_stability_closed_form,
    class_stability,
    cube_stability_closed_form,
    volume_matched_ratio,
)

__all__ = [
    "__version__",
    "Ball", "Box", "BoxUnion", "FiniteSet",
    "PointCloud", "GridField", "OracleField", "relabel", "rescale_domain",
    "DistanceEstimate", "pointwise_distance", "measure_distance", "distance_profile", "boundary_distances",
    "StabilityEstimate", "class_stability", "cube_stability_closed_form", "ball_stability_closed_form",
    "volume_matched_ratio", "accuracy_measure",
    "HField", "h_field", "StableSet", "stable_set", "class_prediction", "omega", "compose_G",
    "lipschitz_check_H",
    "MLP", "ShallowNet", "eval_net", "load_net", "save_net", "train_shallow", "train_narrow_deep",
    "verify_net", "rounding_chain",
    "builtin_field", "load_field", "save_field", "reproduce_paper",
    "HFieldTransformer", "BoundaryDistanceTransformer", "StableNetClassifier",
]
