"""Spatial decorrelation preprocessing for machine learning.

Whitens spatially correlated responses and features through nearest-neighbor
Gaussian conditioning so any regression learner can train with an ordinary
loss, then re-correlates its predictions at new locations.
"""

from .errors import (
    NotFittedError,
    NumericalError,
    SingularCorrelationError,
    ValidationError,
    VdecorError,
)
from .geom import KnnIndex, build_knn_index, conditioning_sets, maxmin_order
from .kernel import CorrelationModel, correlation, correlation_block, cross_correlation
from .learners import BaggedTrees, FitReport, KnnRegressor, LinearModel, make_learner
from .pipeline import Pipeline, SpatialData, add_intercept, fit_pipeline
from .simgen import SimulationConfig, generate_scenario, sample_gp, sample_locations
from .tune import CvResult, TuningGrid, cross_validate, final_fit
from .vecchia import (
    PredictionFactors,
    TransformedDataset,
    VecchiaFactors,
    compute_factors,
    decorrelate_features,
    decorrelate_response,
    prediction_factors,
    recorrelate_prediction,
    transform_dataset,
    transform_features_at,
    whitening_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BaggedTrees",
    "CorrelationModel",
    "CvResult",
    "FitReport",
    "KnnIndex",
    "KnnRegressor",
    "LinearModel",
    "NotFittedError",
    "NumericalError",
    "Pipeline",
    "PredictionFactors",
    "SimulationConfig",
    "SingularCorrelationError",
    "SpatialData",
    "TransformedDataset",
    "TuningGrid",
    "ValidationError",
    "VdecorError",
    "VecchiaFactors",
    "add_intercept",
    "build_knn_index",
    "compute_factors",
    "conditioning_sets",
    "correlation",
    "correlation_block",
    "cross_correlation",
    "cross_validate",
    "decorrelate_features",
    "decorrelate_response",
    "final_fit",
    "fit_pipeline",
    "generate_scenario",
    "make_learner",
    "maxmin_order",
    "prediction_factors",
    "recorrelate_prediction",
    "sample_gp",
    "sample_locations",
    "transform_dataset",
    "transform_features_at",
    "whitening_matrix",
    "__version__",
]
