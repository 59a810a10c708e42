"""Parametric spatial correlation functions.

The pairwise correlation between observations i != j at distance d is
(1 - nugget) * rho(d | range), with a unit diagonal, so the total sill stays
normalized. ``correlation`` returns the pre-nugget rho; the block builders
apply the nugget multiplier off-diagonal.

Matern uses the form rho(d) = 2^(1-nu)/Gamma(nu) * (d/range)^nu * K_nu(d/range)
with no sqrt(2 nu) rescaling inside the argument, and the exact limit value 1
at d = 0. At nu = 0.5 this reduces to the exponential kernel.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gamma, kv

from .errors import ValidationError
from .geom import as_locations

FAMILIES = ("exponential", "matern")


@dataclass(frozen=True)
class CorrelationModel:
    """Kernel family plus range, smoothness (Matern only), and nugget."""

    family: str
    range: float
    nugget: float = 0.0
    smoothness: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}, expected one of {FAMILIES}")
        if not np.isfinite(self.range) or self.range <= 0:
            raise ValidationError(f"range must be a positive finite real, got {self.range}")
        if not 0.0 <= self.nugget <= 1.0:
            raise ValidationError(f"nugget must lie in [0, 1], got {self.nugget}")
        if self.family == "matern":
            if self.smoothness is None or not np.isfinite(self.smoothness) or self.smoothness <= 0:
                raise ValidationError(f"matern smoothness must be a positive finite real, got {self.smoothness}")
        elif self.smoothness is not None:
            raise ValidationError("smoothness is only meaningful for the matern family")

    def to_dict(self):
        d = {"family": self.family, "range": float(self.range), "nugget": float(self.nugget)}
        if self.family == "matern":
            d["smoothness"] = float(self.smoothness)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {"family", "range", "nugget", "smoothness"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown kernel keys: {sorted(extra)}")
        return cls(
            family=d.get("family"),
            range=d.get("range"),
            nugget=d.get("nugget", 0.0),
            smoothness=d.get("smoothness"),
        )


def correlation(d, model):
    """Pre-nugget correlation rho(d | range) for scalar or array distances.

    Exponential: exp(-d/range). Matern: 2^(1-nu)/Gamma(nu) x^nu K_nu(x) with
    x = d/range; exact value 1 at d = 0. Extreme scale/smoothness combinations
    that over- or underflow the Bessel evaluation saturate to the exact 0/1
    limits. Negative distances are rejected.
    """
    arr = np.asarray(d, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValidationError("distances must be finite")
    if (arr < 0).any():
        raise ValidationError("distances must be nonnegative")
    x = np.atleast_1d(arr) / model.range
    if model.family == "exponential":
        out = np.exp(-x)
    else:
        nu = model.smoothness
        out = np.ones_like(x)
        pos = x > 0
        with np.errstate(invalid="ignore", over="ignore", under="ignore"):
            val = (2.0 ** (1.0 - nu) / gamma(nu)) * x[pos] ** nu * kv(nu, x[pos])
        # 0 * inf from extreme under/overflow: small x means the exact limit 1
        bad = ~np.isfinite(val)
        if bad.any():
            val[bad] = np.where(x[pos][bad] < 1.0, 1.0, 0.0)
        out[pos] = val
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def correlation_block(indices, coords, model):
    """Correlation matrix over a subset of points.

    Unit diagonal; off-diagonal entries (1 - nugget) * rho(d_ij). Symmetric by
    construction and positive definite for distinct points (strictly, when the
    nugget is positive or the points are pairwise distinct).
    """
    coords = as_locations(coords)
    pts = coords[np.asarray(indices, dtype=np.int64)]
    dmat = cdist(pts, pts)
    block = (1.0 - model.nugget) * correlation(dmat, model)
    np.fill_diagonal(block, 1.0)
    return block


def cross_correlation(target, indices, coords, model):
    """Correlation vector between one target location and a point subset.

    Entry j is (1 - nugget) * rho(||target - p_j||); a target coinciding with
    a subset point still gets the off-diagonal value 1 - nugget, never 1.
    """
    coords = as_locations(coords)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.shape[0] != coords.shape[1]:
        raise ValidationError(f"target dimension {target.shape[0]} != location dimension {coords.shape[1]}")
    if not np.isfinite(target).all():
        raise ValidationError("target coordinates must be finite")
    pts = coords[np.asarray(indices, dtype=np.int64)]
    d = np.sqrt(((pts - target) ** 2).sum(axis=1))
    return (1.0 - model.nugget) * correlation(d, model)


def dense_correlation(coords, model):
    """Full n x n correlation matrix; meant for oracles and small-n sampling."""
    coords = as_locations(coords)
    dmat = cdist(coords, coords)
    mat = (1.0 - model.nugget) * correlation(dmat, model)
    np.fill_diagonal(mat, 1.0)
    return mat
