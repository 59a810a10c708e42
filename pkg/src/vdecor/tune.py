"""Joint cross-validated tuning of kernel parameters and learner settings.

The nugget and range are treated as ordinary hyperparameters searched on a
grid together with the learner's own grid. Every fold is scored the way the
pipeline is used at deploy time: factors come from the fold-train rows only,
each held-out point is transformed as a prediction location, and the RMSE is
taken on the original (back-transformed) scale, so no held-out response ever
enters the transform.
"""

import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ValidationError
from .geom import KnnIndex
from .kernel import CorrelationModel
from .learners import make_learner
from .pipeline import SpatialData, add_intercept, fit_pipeline
from .vecchia import (
    build_geometry,
    compute_factors,
    prediction_factors,
    recorrelate_prediction,
    transform_dataset,
    transform_features_at,
)

DEFAULT_NUGGETS = (0.0, 0.25, 0.5, 0.75, 1.0)
_SEEDED_LEARNERS = ("trees", "bagged-trees")


def default_ranges(coords, count=5):
    """Log-spaced range candidates from 1% of the max pairwise distance to a
    third of it. The max distance is exact up to 2000 points and estimated on
    an evenly strided subsample beyond that."""
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if n > 2000:
        coords = coords[:: int(np.ceil(n / 2000))]
    dmax = float(pdist(coords).max()) if coords.shape[0] > 1 else 1.0
    if dmax <= 0:
        dmax = 1.0
    return tuple(np.geomspace(0.01 * dmax, dmax / 3.0, count).tolist())


@dataclass(frozen=True)
class TuningGrid:
    """Grid of nugget/range values plus per-hyperparameter learner values."""

    nuggets: tuple = DEFAULT_NUGGETS
    ranges: tuple = None  # derived from the data when absent
    learner_grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.nuggets) == 0:
            raise ValidationError("nugget grid is empty")
        for w in self.nuggets:
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"nugget {w} outside [0, 1]")
        if self.ranges is not None:
            if len(self.ranges) == 0:
                raise ValidationError("range grid is empty")
            for r in self.ranges:
                if r <= 0:
                    raise ValidationError(f"range {r} must be positive")
        for name, values in self.learner_grid.items():
            if len(values) == 0:
                raise ValidationError(f"learner grid for {name!r} is empty")

    def cells(self, coords):
        """Materialize grid cells in deterministic order."""
        ranges = self.ranges if self.ranges is not None else default_ranges(coords)
        names = sorted(self.learner_grid)
        combos = list(itertools.product(*(self.learner_grid[k] for k in names))) or [()]
        out = []
        for w in self.nuggets:
            for r in ranges:
                for combo in combos:
                    out.append({"nugget": float(w), "range": float(r), "learner": dict(zip(names, combo))})
        return out


@dataclass
class CvResult:
    cells: list
    best: dict
    folds: int
    seed: int
    wall_time_s: float
    learner_kind: str = None
    family: str = "exponential"
    smoothness: float = None
    cap: int = 30

    def to_dict(self):
        return {
            "cells": self.cells,
            "best": self.best,
            "folds": self.folds,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
            "learner_kind": self.learner_kind,
            "family": self.family,
            "smoothness": self.smoothness,
            "cap": self.cap,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls(**{k: d[k] for k in (
            "cells", "best", "folds", "seed", "wall_time_s",
            "learner_kind", "family", "smoothness", "cap",
        ) if k in d})


def _stable_seed(*parts):
    payload = json.dumps(parts, sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def _fold_assignment(data, folds, seed, blocked):
    n = data.n
    if blocked:
        # contiguous strips along the first coordinate: crude spatial blocks
        rank = np.argsort(np.argsort(data.coords[:, 0], kind="stable"), kind="stable")
        return (rank * folds) // n
    ids = np.arange(n) % folds
    return ids[np.random.default_rng(seed).permutation(n)]


def _cell_model(cell, family, smoothness):
    return CorrelationModel(
        family,
        range=cell["range"],
        nugget=cell["nugget"],
        smoothness=smoothness if family == "matern" else None,
    )


def _cell_learner(cell, learner_kind, seed, fold):
    spec = {"kind": learner_kind, **cell["learner"]}
    if learner_kind in _SEEDED_LEARNERS and "seed" not in spec:
        spec["seed"] = _stable_seed(seed, fold, cell["nugget"], cell["range"], cell["learner"])
    return make_learner(spec)


def cross_validate(data, learner_kind, grid, folds=5, seed=0, cap=30, family="exponential",
                   smoothness=None, blocked=False):
    """Grid search by k-fold cross-validated prediction RMSE.

    Factor computation sees fold-train rows only; held-out rows are scored
    through the prediction pathway (neighbor factors, feature transform,
    learner, back-transform), leakage-free by construction. Ties prefer the
    larger nugget, then the smaller range.
    """
    if not isinstance(data, SpatialData):
        raise ValidationError("cross_validate expects a SpatialData instance")
    folds = int(folds)
    if folds < 2 or data.n < folds:
        raise ValidationError(f"need 2 <= folds <= n, got folds={folds}, n={data.n}")
    if data.n // folds < 2:
        raise ValidationError("every fold needs at least 2 rows")
    cells = grid.cells(data.coords)
    if not cells:
        raise ValidationError("tuning grid is empty")

    t0 = time.perf_counter()
    fold_of = _fold_assignment(data, folds, seed, blocked)
    X_all = add_intercept(data.features)

    fold_ctx = []
    for f in range(folds):
        te = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        geometry = build_geometry(data.coords[tr], min(cap, max(1, tr.size - 1)))
        index = KnnIndex(data.coords[tr])
        k = min(tr.size, int(cap))
        _, neighbors = index.query(data.coords[te], k=k)
        fold_ctx.append((tr, te, geometry, np.atleast_2d(neighbors)))

    results = []
    for cell in cells:
        fold_rmses = []
        for f, (tr, te, geometry, neighbors) in enumerate(fold_ctx):
            model = _cell_model(cell, family, smoothness)
            factors = compute_factors(data.coords[tr], model, cap=geometry[1].cap, geometry=geometry)
            td = transform_dataset(data.response[tr], X_all[tr], factors)
            learner = _cell_learner(cell, learner_kind, seed, f)
            learner.fit(td.xtilde, td.ytilde)
            pf = prediction_factors(data.coords[te], data.coords[tr], model,
                                    cap=geometry[1].cap, neighbors=neighbors)
            xt = transform_features_at(X_all[te], X_all[tr], pf)
            yt_pred = learner.predict(np.atleast_2d(xt))
            y_pred = recorrelate_prediction(yt_pred, pf, data.response[tr])
            fold_rmses.append(float(np.sqrt(np.mean((y_pred - data.response[te]) ** 2))))
        results.append({**cell, "fold_rmses": fold_rmses, "mean_rmse": float(np.mean(fold_rmses))})

    def rank_key(i):
        c = results[i]
        return (c["mean_rmse"], -c["nugget"], c["range"], i)

    best = dict(results[min(range(len(results)), key=rank_key)])
    return CvResult(
        cells=results,
        best=best,
        folds=folds,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
        learner_kind=learner_kind,
        family=family,
        smoothness=smoothness,
        cap=int(cap),
    )


def final_fit(data, cell, learner_kind, cap=30, family="exponential", smoothness=None, seed=0):
    """Fit the full-training pipeline at a chosen grid cell."""
    model = _cell_model(cell, family, smoothness)
    learner = _cell_learner(cell, learner_kind, seed, fold="final")
    return fit_pipeline(data, model, learner, cap=min(cap, max(1, data.n - 1)))
