"""Online loop-closure detection by sparse l1-minimization.

Each incoming frame becomes a unit feature vector, the dictionary
[I_n | B] grows by one column per frame, and revisits are decided from the
normalized solution of a per-query l1-regularized reconstruction problem
solved by a homotopy path method.
"""

from .detector import DetectorConfig, LoopDetector, LoopHypothesis, QueryTrace
from .dictionary import ColumnIndex, Dictionary, new_dictionary
from .features import (
    FeatureVector,
    GrayImage,
    image_to_feature,
    load_descriptors,
    stack_features,
    unit_feature,
)
from .homotopy import SolverConfig, SparseSolution, certify_kkt, solve

__all__ = [
    "ColumnIndex",
    "DetectorConfig",
    "Dictionary",
    "FeatureVector",
    "GrayImage",
    "LoopDetector",
    "LoopHypothesis",
    "QueryTrace",
    "SolverConfig",
    "SparseSolution",
    "certify_kkt",
    "image_to_feature",
    "load_descriptors",
    "new_dictionary",
    "solve",
    "stack_features",
    "unit_feature",
]

__version__ = "0.1.0"
