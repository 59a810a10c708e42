"""Built-in regression learners for the decorrelation pipeline.

All learners treat the (transformed) intercept column as an ordinary
feature and never add intercept handling of their own. Fitted state is
immutable after fit; prediction is deterministic given that state.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotFittedError, ValidationError
from .geom import KnnIndex

_RIDGE = 1e-8


@dataclass
class FitReport:
    training_rmse: float
    hyperparameters: dict
    wall_time_s: float

    def to_dict(self):
        return {
            "training_rmse": self.training_rmse,
            "hyperparameters": self.hyperparameters,
            "wall_time_s": self.wall_time_s,
        }


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-d, got ndim={X.ndim}")
    if y.shape != (X.shape[0],):
        raise ValidationError(f"response shape {y.shape} does not match {X.shape[0]} rows")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 training rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValidationError("training data contains non-finite values")
    return X, y


class LinearModel:
    """Least-squares linear predictor (no implicit intercept).

    Normal equations solved by Cholesky; a rank-deficient Gram matrix falls
    back to a small ridge (1e-8) solve.
    """

    kind = "linear"

    def __init__(self):
        self.coef_ = None
        self.report_ = None

    def hyperparameters(self):
        return {}

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        t0 = time.perf_counter()
        G = X.T @ X
        rhs = X.T @ y
        try:
            self.coef_ = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G, lower=True), rhs)
        except scipy.linalg.LinAlgError:
            p = G.shape[0]
            self.coef_ = np.linalg.solve(G + _RIDGE * np.eye(p), rhs)
        rmse = float(np.sqrt(np.mean((X @ self.coef_ - y) ** 2)))
        self.report_ = FitReport(rmse, self.hyperparameters(), time.perf_counter() - t0)
        return self

    def predict(self, X):
        if self.coef_ is None:
            raise NotFittedError("LinearModel.predict before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValidationError(f"expected {self.coef_.shape[0]} feature columns, got {X.shape[1]}")
        return X @ self.coef_

    def to_dict(self):
        if self.coef_ is None:
            raise NotFittedError("cannot serialize an unfitted LinearModel")
        return {"kind": self.kind, "coefficients": self.coef_.tolist()}

    @classmethod
    def from_dict(cls, d):
        m = cls()
        m.coef_ = np.asarray(d["coefficients"], dtype=np.float64)
        return m


class KnnRegressor:
    """Mean response of the k nearest training rows in feature space.

    Distance ties resolve to the lower training-row index; k is clamped to
    the training size at prediction time.
    """

    kind = "knn"

    def __init__(self, k=5):
        k = int(k)
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        self.k = k
        self._X = None
        self._y = None
        self._index = None
        self.report_ = None

    def hyperparameters(self):
        return {"k": self.k}

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        t0 = time.perf_counter()
        self._X, self._y = X, y
        self._index = KnnIndex(X)
        rmse = float(np.sqrt(np.mean((self.predict(X) - y) ** 2)))
        self.report_ = FitReport(rmse, self.hyperparameters(), time.perf_counter() - t0)
        return self

    def predict(self, X):
        if self._index is None:
            raise NotFittedError("KnnRegressor.predict before fit")
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, self._X.shape[0])
        _, idx = self._index.query(X, k=k)
        return self._y[np.atleast_2d(idx)].mean(axis=1)

    def to_dict(self):
        if self._index is None:
            raise NotFittedError("cannot serialize an unfitted KnnRegressor")
        return {"kind": self.kind, "k": self.k, "X": self._X.tolist(), "y": self._y.tolist()}

    @classmethod
    def from_dict(cls, d):
        m = cls(k=d["k"])
        m._X = np.asarray(d["X"], dtype=np.float64)
        m._y = np.asarray(d["y"], dtype=np.float64)
        m._index = KnnIndex(m._X)
        return m


class _Tree:
    """CART regression tree stored as flat node arrays.

    feature[j] is -1 at leaves; routing sends x <= threshold left. Splits
    maximize variance reduction over midpoints of consecutive distinct
    sorted values, requiring min_leaf rows on each side.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value

    def predict(self, X):
        m = X.shape[0]
        cur = np.zeros(m, dtype=np.int64)
        while True:
            f = self.feature[cur]
            live = f >= 0
            if not live.any():
                break
            rows = np.flatnonzero(live)
            x = X[rows, f[rows]]
            goleft = x <= self.threshold[cur[rows]]
            cur[rows] = np.where(goleft, self.left[cur[rows]], self.right[cur[rows]])
        return self.value[cur]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def _best_split(x, y, min_leaf):
    """Best (sse, threshold) for one feature column, or None."""
    order = np.argsort(x, kind="stable")
    sx, sy = x[order], y[order]
    m = sx.shape[0]
    ks = np.arange(min_leaf, m - min_leaf + 1)  # left-side sizes
    if ks.size == 0:
        return None
    valid = sx[ks - 1] < sx[ks]
    if not valid.any():
        return None
    s1 = np.cumsum(sy)
    s2 = np.cumsum(sy * sy)
    tot1, tot2 = s1[-1], s2[-1]
    nl = ks.astype(np.float64)
    l1 = s1[ks - 1]
    l2 = s2[ks - 1]
    sse = (l2 - l1 * l1 / nl) + ((tot2 - l2) - (tot1 - l1) ** 2 / (m - nl))
    thr = 0.5 * (sx[ks - 1] + sx[ks])
    # a midpoint that rounds onto the right-hand value cannot separate rows
    valid &= thr < sx[ks]
    if not valid.any():
        return None
    sse = np.where(valid, sse, np.inf)
    j = int(np.argmin(sse))  # first minimum: smallest threshold wins ties
    return float(sse[j]), float(thr[j])


def _grow_tree(X, y, min_leaf, mtry, rng):
    feature, threshold, left, right, value = [], [], [], [], []
    p = X.shape[1]
    stack = [(np.arange(X.shape[0]), -1, False)]  # rows, parent, is_right
    while stack:
        rows, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        yr = y[rows]
        value.append(float(yr.mean()))
        if rows.size < 2 * min_leaf or np.ptp(yr) == 0.0:
            continue
        cand = np.sort(rng.choice(p, size=mtry, replace=False)) if mtry < p else np.arange(p)
        best = None
        for f in cand:
            got = _best_split(X[rows, f], yr, min_leaf)
            if got is not None and (best is None or got[0] < best[0]):
                best = (got[0], int(f), got[1])
        if best is None:
            continue
        _, f, thr = best
        feature[node] = f
        threshold[node] = thr
        goleft = X[rows, f] <= thr
        # push right first so the left child is grown (and numbered) first
        stack.append((rows[~goleft], node, True))
        stack.append((rows[goleft], node, False))
    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )


class BaggedTrees:
    """Bootstrap-aggregated CART regression trees.

    Each tree fits a seeded bootstrap resample with per-split feature
    subsampling (mtry; all features when unset). Desk-scale default of 64
    trees; tree fitting is embarrassingly parallel in principle but runs
    sequentially here.
    """

    kind = "bagged-trees"

    def __init__(self, trees=64, min_leaf=5, mtry=None, seed=0):
        if int(trees) < 1 or int(min_leaf) < 1:
            raise ValidationError("trees and min_leaf must be >= 1")
        if mtry is not None and int(mtry) < 1:
            raise ValidationError("mtry must be >= 1 when given")
        self.trees = int(trees)
        self.min_leaf = int(min_leaf)
        self.mtry = None if mtry is None else int(mtry)
        self.seed = int(seed)
        self.forest_ = None
        self.report_ = None

    def hyperparameters(self):
        return {"trees": self.trees, "min_leaf": self.min_leaf, "mtry": self.mtry, "seed": self.seed}

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        t0 = time.perf_counter()
        n, p = X.shape
        mtry = p if self.mtry is None else min(self.mtry, p)
        self.forest_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.trees):
            rng = np.random.default_rng(child)
            boot = rng.integers(0, n, size=n)
            self.forest_.append(_grow_tree(X[boot], y[boot], self.min_leaf, mtry, rng))
        rmse = float(np.sqrt(np.mean((self.predict(X) - y) ** 2)))
        self.report_ = FitReport(rmse, self.hyperparameters(), time.perf_counter() - t0)
        return self

    def predict(self, X):
        if self.forest_ is None:
            raise NotFittedError("BaggedTrees.predict before fit")
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for tree in self.forest_:
            out += tree.predict(X)
        return out / len(self.forest_)

    def to_dict(self):
        if self.forest_ is None:
            raise NotFittedError("cannot serialize an unfitted BaggedTrees")
        return {
            "kind": self.kind,
            "trees": self.trees,
            "min_leaf": self.min_leaf,
            "mtry": self.mtry,
            "seed": self.seed,
            "forest": [t.to_dict() for t in self.forest_],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(trees=d["trees"], min_leaf=d["min_leaf"], mtry=d["mtry"], seed=d["seed"])
        m.forest_ = [_Tree.from_dict(t) for t in d["forest"]]
        return m


_KINDS = {
    "linear": LinearModel,
    "lm": LinearModel,
    "knn": KnnRegressor,
    "bagged-trees": BaggedTrees,
    "trees": BaggedTrees,
}


def make_learner(spec):
    """Build a learner from a {"kind": ..., **hyperparameters} mapping."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    cls = _KINDS.get(str(kind).lower() if kind else "")
    if cls is None:
        raise ValidationError(f"unknown learner kind {kind!r}; expected one of {sorted(set(_KINDS))}")
    try:
        return cls(**spec)
    except TypeError as exc:
        raise ValidationError(f"bad hyperparameters for {kind}: {exc}") from None


def load_learner(d):
    cls = _KINDS.get(d.get("kind"))
    if cls is None:
        raise ValidationError(f"unknown learner kind in artifact: {d.get('kind')!r}")
    return cls.from_dict(d)
