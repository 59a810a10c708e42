"""Nearest-neighbor Gaussian conditioning and the decorrelation transform.

For observations taken in max-min order, each one conditions on at most C
nearest earlier neighbors. The conditional-Gaussian weight vector b_i and
variance v_i give the forward (whitening) transform

    ytilde_i = v_i^{-1/2} (y_i - b_i . y_{set_i})        (position 0 passes through)

applied identically to the response and to every feature column, including
the intercept column. Predictions at new locations invert the same map using
the C nearest training points:

    y*(u) = v_u^{1/2} ytilde*(u) + b_u . y_{set_u}

All math is 64-bit; the per-observation solves are independent and read-only
once the ordering and sets are fixed.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SingularCorrelationError, ValidationError
from .geom import KnnIndex, as_locations, conditioning_sets, maxmin_order, ConditioningSets
from .kernel import CorrelationModel, correlation, dense_correlation

FACTORS_FORMAT_VERSION = 1

# Conditional variances hit exactly 0 when a prediction point coincides with
# a training point under a zero nugget; the floor only guards the inverse
# square root in forward transforms, never the back-transform.
VAR_FLOOR = 1e-12

_JITTER = 1e-10
_CHUNK = 2048


def _tri_solve_lower(L, y):
    """Solve L x = y for batches: L (m, s, s) lower-triangular, y (m, s)."""
    s = L.shape[1]
    x = np.empty_like(y)
    x[:, 0] = y[:, 0] / L[:, 0, 0]
    for j in range(1, s):
        acc = np.einsum("mi,mi->m", L[:, j, :j], x[:, :j])
        x[:, j] = (y[:, j] - acc) / L[:, j, j]
    return x


def _tri_solve_upper_t(L, y):
    """Solve L^T x = y for batches with L lower-triangular."""
    s = L.shape[1]
    x = np.empty_like(y)
    x[:, s - 1] = y[:, s - 1] / L[:, s - 1, s - 1]
    for j in range(s - 2, -1, -1):
        acc = np.einsum("mi,mi->m", L[:, j + 1 :, j], x[:, j + 1 :])
        x[:, j] = (y[:, j] - acc) / L[:, j, j]
    return x


def _cholesky_with_jitter(blocks, labels):
    """Batched Cholesky with a single diagonal-jitter retry.

    labels maps batch row to an observation identifier used in the error
    message when the jittered factorization still fails.
    """
    try:
        return np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError:
        pass
    s = blocks.shape[1]
    jittered = blocks.copy()
    jittered[:, np.arange(s), np.arange(s)] += _JITTER
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        for r in range(jittered.shape[0]):
            try:
                np.linalg.cholesky(jittered[r])
            except np.linalg.LinAlgError:
                raise SingularCorrelationError(
                    f"correlation submatrix for observation {labels[r]} is singular "
                    "even after jitter; duplicate locations with a zero nugget?"
                ) from None
        raise SingularCorrelationError("batched Cholesky failed but no singular block found")


def _solve_weights(blocks, r, labels):
    """(b, v) from correlation blocks (m, s, s) and cross vectors r (m, s)."""
    m = blocks.shape[0]
    b = np.empty_like(r)
    v = np.empty(m)
    L = _cholesky_with_jitter(blocks, labels)
    if m == 1:
        # single large block: LAPACK triangular solves beat the batched
        # column loop (matters under full conditioning)
        w1 = scipy.linalg.solve_triangular(L[0], r[0], lower=True)
        v[0] = 1.0 - w1 @ w1
        b[0] = scipy.linalg.solve_triangular(L[0], w1, lower=True, trans="T")
    else:
        w = _tri_solve_lower(L, r)
        v[:] = 1.0 - np.einsum("mi,mi->m", w, w)
        b[:] = _tri_solve_upper_t(L, w)
    return b, v


def _conditional_weights(nbr_coords, target_coords, model, labels):
    """Conditional-Gaussian (weights, variances) for a batch of targets.

    nbr_coords is (m, s, d), target_coords (m, d). Returns b (m, s) and
    v (m,) with v clipped into [0, 1] (negatives are pure roundoff).
    """
    m, s, _ = nbr_coords.shape
    off = 1.0 - model.nugget
    b = np.empty((m, s))
    v = np.empty(m)
    for lo in range(0, m, _CHUNK):
        hi = min(m, lo + _CHUNK)
        nc = nbr_coords[lo:hi]
        diff = nc[:, :, None, :] - nc[:, None, :, :]
        dmat = np.sqrt((diff * diff).sum(axis=-1))
        blocks = off * correlation(dmat, model)
        blocks[:, np.arange(s), np.arange(s)] = 1.0
        dvec = np.sqrt(((nc - target_coords[lo:hi, None, :]) ** 2).sum(axis=-1))
        r = off * correlation(dvec, model)
        b[lo:hi], v[lo:hi] = _solve_weights(blocks, r, labels[lo:hi])
    return b, np.clip(v, 0.0, 1.0)


@dataclass
class VecchiaFactors:
    """Ordering, conditioning sets, and per-observation (b_i, v_i).

    order maps position to original row index; sets hold original indices,
    nearest first, aligned with the weight vectors. variances[0] is 1 and the
    position-0 weight vector is empty.
    """

    order: np.ndarray
    sets: ConditioningSets
    weights: list
    variances: np.ndarray
    model: CorrelationModel
    cap: int
    _padded: tuple = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.order.shape[0]

    def padded_weights(self):
        """(idx, w): (n, cap) neighbor indices and weights, zero-padded."""
        if self._padded is None:
            idx, mask = self.sets.padded()
            w = np.zeros(idx.shape)
            for i, wi in enumerate(self.weights):
                w[i, : wi.size] = wi
            self._padded = (idx, w)
        return self._padded

    def inv_sqrt_variances(self):
        return 1.0 / np.sqrt(np.maximum(self.variances, VAR_FLOOR))

    def to_dict(self):
        return {
            "version": FACTORS_FORMAT_VERSION,
            "cap": int(self.cap),
            "model": self.model.to_dict(),
            "order": self.order.tolist(),
            "sets": [s.tolist() for s in self.sets.sets],
            "weights": [w.tolist() for w in self.weights],
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != FACTORS_FORMAT_VERSION:
            raise ValidationError(f"unsupported factors artifact version {d.get('version')!r}")
        order = np.asarray(d["order"], dtype=np.int64)
        n = order.shape[0]
        if not np.array_equal(np.sort(order), np.arange(n)):
            raise ValidationError("factors artifact: order is not a permutation")
        sets = [np.asarray(s, dtype=np.int64) for s in d["sets"]]
        weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        if len(sets) != n or len(weights) != n:
            raise ValidationError("factors artifact: sets/weights length mismatch")
        for i, (s, w) in enumerate(zip(sets, weights)):
            if s.shape != w.shape:
                raise ValidationError(f"factors artifact: set/weight size mismatch at position {i}")
        return cls(
            order=order,
            sets=ConditioningSets(sets=sets, cap=int(d["cap"])),
            weights=weights,
            variances=np.asarray(d["variances"], dtype=np.float64),
            model=CorrelationModel.from_dict(d["model"]),
            cap=int(d["cap"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_geometry(coords, cap):
    """Model-independent part of the factors: (ordering, conditioning sets).

    Reusable across correlation models over the same coordinates, e.g. while
    grid-searching kernel parameters.
    """
    coords = as_locations(coords)
    order = maxmin_order(coords)
    return order, conditioning_sets(coords, order, cap)


def compute_factors(coords, model, cap=30, geometry=None):
    """Order observations, build conditioning sets, and solve for (b_i, v_i).

    Each solve is a Cholesky factorization of the (<= cap x cap) correlation
    matrix over the conditioning set; a failed factorization is retried once
    with diagonal jitter 1e-10 and then reported as a singular-correlation
    error naming the observation. Pass geometry from :func:`build_geometry`
    to skip recomputing the ordering and sets.
    """
    coords = as_locations(coords)
    n = coords.shape[0]
    if geometry is None:
        geometry = build_geometry(coords, cap)
    order, sets = geometry
    if len(sets) != n or sets.cap != int(cap):
        raise ValidationError("geometry does not match the coordinates/cap")

    weights = [np.empty(0)] * n
    variances = np.ones(n)

    # With near-full conditioning the blocks recompute far more pairwise
    # correlations than one dense matrix holds; gather from it instead.
    dense = None
    if n <= 2048 and sum(s.size * s.size for s in sets.sets) > 2 * n * n:
        dense = dense_correlation(coords, model)

    by_size = {}
    for i in range(1, n):
        by_size.setdefault(sets[i].size, []).append(i)
    for size, positions in by_size.items():
        positions = np.asarray(positions, dtype=np.int64)
        nbr = np.stack([sets[i] for i in positions])
        targets = order[positions]
        if dense is not None:
            blocks = dense[nbr[:, :, None], nbr[:, None, :]]
            r = dense[targets[:, None], nbr]
            b, v = _solve_weights(blocks, r, labels=targets.tolist())
            v = np.clip(v, 0.0, 1.0)
        else:
            b, v = _conditional_weights(coords[nbr], coords[targets], model, labels=targets.tolist())
        variances[positions] = v
        for row, i in enumerate(positions):
            weights[i] = b[row]
    return VecchiaFactors(
        order=order, sets=sets, weights=weights, variances=variances, model=model, cap=int(cap)
    )


def decorrelate_response(y, factors):
    """Forward transform of the response vector (rows in max-min order)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (factors.n,):
        raise ValidationError(f"response must have shape ({factors.n},), got {y.shape}")
    if not np.isfinite(y).all():
        raise ValidationError("response contains non-finite values")
    idx, w = factors.padded_weights()
    contrib = (w * y[idx]).sum(axis=1)
    return (y[factors.order] - contrib) * factors.inv_sqrt_variances()


def decorrelate_features(X, factors):
    """Forward transform of the design matrix, column by column.

    X must carry a leading intercept column of exact ones; the transformed
    intercept varies across rows and is kept as an ordinary feature.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != factors.n:
        raise ValidationError(f"feature matrix must be ({factors.n}, P+1), got {X.shape}")
    if not np.isfinite(X).all():
        raise ValidationError("feature matrix contains non-finite values")
    if not (X[:, 0] == 1.0).all():
        raise ValidationError("leading feature column must be an all-ones intercept")
    idx, w = factors.padded_weights()
    isv = factors.inv_sqrt_variances()
    out = np.empty_like(X)
    for p in range(X.shape[1]):
        col = X[:, p]
        out[:, p] = (col[factors.order] - (w * col[idx]).sum(axis=1)) * isv
    return out


@dataclass
class TransformedDataset:
    """Decorrelated response and features, rows in max-min order."""

    ytilde: np.ndarray
    xtilde: np.ndarray
    factors: VecchiaFactors

    @property
    def order(self):
        return self.factors.order


def transform_dataset(y, X, factors):
    return TransformedDataset(
        ytilde=decorrelate_response(y, factors),
        xtilde=decorrelate_features(X, factors),
        factors=factors,
    )


@dataclass
class PredictionFactors:
    """Neighbor sets, weights, and variances for a batch of query locations."""

    neighbors: np.ndarray  # (m, k) training row indices, nearest first
    weights: np.ndarray  # (m, k)
    variances: np.ndarray  # (m,)

    def __len__(self):
        return self.neighbors.shape[0]


def prediction_factors(query, coords, model, cap=30, index=None, neighbors=None):
    """Conditional factors of query locations given all training points.

    Neighbor search runs over the full training set (no ordering restriction).
    Pass a prebuilt KnnIndex, or the (m, k) neighbor array from a previous
    call over the same query/coords, to amortize repeated calls while
    grid-searching kernel parameters.
    """
    coords = as_locations(coords)
    q = np.asarray(query, dtype=np.float64)
    q = np.atleast_2d(q)
    if neighbors is None:
        if index is None:
            index = KnnIndex(coords)
        k = min(coords.shape[0], int(cap))
        _, neighbors = index.query(q, k)
        neighbors = np.atleast_2d(neighbors)
    b, v = _conditional_weights(
        coords[neighbors], q, model, labels=[f"query {i}" for i in range(len(q))]
    )
    return PredictionFactors(neighbors=neighbors, weights=b, variances=v)


def transform_features_at(x, X_train, pf):
    """Forward-transform feature rows at query locations (intercept included)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    X_train = np.asarray(X_train, dtype=np.float64)
    if x.shape[0] != len(pf):
        raise ValidationError(f"expected {len(pf)} feature rows, got {x.shape[0]}")
    if X_train.ndim != 2 or X_train.shape[1] != x.shape[1]:
        raise ValidationError(
            f"training features have {X_train.shape[1] if X_train.ndim == 2 else '?'} columns, "
            f"query rows have {x.shape[1]}"
        )
    contrib = np.einsum("mk,mkp->mp", pf.weights, X_train[pf.neighbors])
    isv = 1.0 / np.sqrt(np.maximum(pf.variances, VAR_FLOOR))
    out = (x - contrib) * isv[:, None]
    return out[0] if single else out


def recorrelate_prediction(yt_star, pf, y_train):
    """Back-transform model output to the observation scale.

    Each query conditions only on training responses, so predictions at
    distinct locations are mutually independent computations. A zero
    conditional variance (query on top of a training point, zero nugget)
    degenerates to exact interpolation of the neighboring response.
    """
    yt = np.asarray(yt_star, dtype=np.float64)
    single = yt.ndim == 0
    yt = np.atleast_1d(yt)
    y_train = np.asarray(y_train, dtype=np.float64)
    if yt.shape[0] != len(pf):
        raise ValidationError(f"expected {len(pf)} predictions, got {yt.shape[0]}")
    out = np.sqrt(pf.variances) * yt + np.einsum("mk,mk->m", pf.weights, y_train[pf.neighbors])
    return float(out[0]) if single else out


def whitening_matrix(factors, max_n=4000):
    """Materialize the implied linear decorrelation map as a dense matrix.

    Row i has 1/sqrt(v_i) at column order[i] and -b_i/sqrt(v_i) at the
    conditioning-set columns, so A @ y (y in original row order) equals
    decorrelate_response(y). For diagnostics and small n only.
    """
    n = factors.n
    if n > max_n:
        raise ValidationError(f"whitening matrix is dense; refusing n={n} > {max_n}")
    isv = factors.inv_sqrt_variances()
    A = np.zeros((n, n))
    A[np.arange(n), factors.order] = isv
    for i in range(n):
        s = factors.sets[i]
        if s.size:
            A[i, s] -= isv[i] * factors.weights[i]
    return A
