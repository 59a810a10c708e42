"""Fitted end-to-end pipeline: decorrelation factors plus a trained learner.

The pipeline owns the training data it conditions on, so a persisted artifact
is self-contained: load it and predict at new locations without the original
files.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geom import as_locations
from .learners import load_learner, make_learner
from .vecchia import (
    VecchiaFactors,
    compute_factors,
    prediction_factors,
    recorrelate_prediction,
    transform_dataset,
    transform_features_at,
)

PIPELINE_FORMAT_VERSION = 1


def add_intercept(features):
    """Prepend the all-ones intercept column to a raw (n, P) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError(f"features must be 2-d, got ndim={features.ndim}")
    return np.column_stack([np.ones(features.shape[0]), features])


@dataclass
class SpatialData:
    """Training triple: coordinates, raw features (no intercept), response."""

    coords: np.ndarray
    features: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        self.coords = as_locations(self.coords)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64)
        n = self.coords.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValidationError(f"features must be ({n}, P), got {self.features.shape}")
        if self.response.shape != (n,):
            raise ValidationError(f"response must have shape ({n},), got {self.response.shape}")
        if not (np.isfinite(self.features).all() and np.isfinite(self.response).all()):
            raise ValidationError("features/response contain non-finite values")

    @property
    def n(self):
        return self.coords.shape[0]


@dataclass
class Pipeline:
    """Decorrelation factors, fitted learner, and the training data."""

    factors: VecchiaFactors
    learner: object
    data: SpatialData

    def predict(self, query_coords, query_features):
        """Algorithm steps at prediction time: transform features at each
        query, run the learner, and back-transform to the observation scale.
        Queries are mutually independent."""
        q = np.atleast_2d(np.asarray(query_coords, dtype=np.float64))
        qf = np.atleast_2d(np.asarray(query_features, dtype=np.float64))
        if q.shape[0] == 0:
            return np.empty(0)
        if qf.shape != (q.shape[0], self.data.features.shape[1]):
            raise ValidationError(
                f"query features must be ({q.shape[0]}, {self.data.features.shape[1]}), got {qf.shape}"
            )
        pf = prediction_factors(q, self.data.coords, self.factors.model, self.factors.cap)
        X_train = add_intercept(self.data.features)
        xt = transform_features_at(add_intercept(qf), X_train, pf)
        yt = self.learner.predict(np.atleast_2d(xt))
        return recorrelate_prediction(yt, pf, self.data.response)

    def to_dict(self):
        return {
            "version": PIPELINE_FORMAT_VERSION,
            "factors": self.factors.to_dict(),
            "learner": self.learner.to_dict(),
            "coords": self.data.coords.tolist(),
            "features": self.data.features.tolist(),
            "response": self.data.response.tolist(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != PIPELINE_FORMAT_VERSION:
            raise ValidationError(f"unsupported pipeline artifact version {d.get('version')!r}")
        data = SpatialData(
            coords=np.asarray(d["coords"], dtype=np.float64),
            features=np.asarray(d["features"], dtype=np.float64),
            response=np.asarray(d["response"], dtype=np.float64),
        )
        return cls(
            factors=VecchiaFactors.from_dict(d["factors"]),
            learner=load_learner(d["learner"]),
            data=data,
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_pipeline(data, model, learner_spec, cap=30, geometry=None):
    """Transform the training data and fit the learner on the whitened scale.

    Returns (pipeline, fit_report).
    """
    factors = compute_factors(data.coords, model, cap=cap, geometry=geometry)
    td = transform_dataset(data.response, add_intercept(data.features), factors)
    learner = learner_spec if hasattr(learner_spec, "fit") else make_learner(learner_spec)
    learner.fit(td.xtilde, td.ytilde)
    return Pipeline(factors=factors, learner=learner, data=data), learner.report_
