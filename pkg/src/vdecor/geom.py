"""Spatial geometry services.

Locations are plain (n, d) float64 arrays validated by :func:`as_locations`.
This module provides exact k-nearest-neighbor search, greedy max-min
ordering, and the nearest-earlier-neighbor conditioning sets that the
decorrelation transform is built on.

Every operation is deterministic: all distance ties resolve to the lower
original row index.
"""

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError


def as_locations(coords):
    """Validate coordinates and return a contiguous (n, d) float64 array.

    Accepts anything array-like; a 1-d input is treated as n points on a
    line. Rejects empty input and non-finite coordinates (naming the
    offending row).
    """
    arr = np.ascontiguousarray(coords, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"locations must be a 2-d array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"need at least one point in >= 1 dimensions, got shape {arr.shape}")
    finite_rows = np.isfinite(arr).all(axis=1)
    if not finite_rows.all():
        row = int(np.argmin(finite_rows))
        raise ValidationError(f"non-finite coordinate at row {row}")
    return arr


def _rowwise_rank(dist, idx):
    """Row-wise indirect sort by (distance, original index)."""
    return np.lexsort((idx, dist), axis=-1)


class KnnIndex:
    """Exact Euclidean k-nearest-neighbor index over a fixed point set.

    Backed by a static KD-tree; immutable after construction, so concurrent
    read-only queries are safe. Equal-distance ties are returned in order of
    increasing original index.
    """

    def __init__(self, coords):
        self.coords = as_locations(coords)
        self.n = self.coords.shape[0]
        self._tree = cKDTree(self.coords)

    def query(self, targets, k):
        """Return (dist, idx), each (m, k), for the k nearest points per target.

        Neighbors are sorted by distance, ties by lower original index.
        """
        t = np.asarray(targets, dtype=np.float64)
        single = t.ndim == 1
        t = np.atleast_2d(t)
        if t.shape[1] != self.coords.shape[1]:
            raise ValidationError(
                f"query dimension {t.shape[1]} != index dimension {self.coords.shape[1]}"
            )
        if not np.isfinite(t).all():
            row = int(np.argmin(np.isfinite(t).all(axis=1)))
            raise ValidationError(f"non-finite query coordinate at row {row}")
        k = int(k)
        if k < 1 or k > self.n:
            raise ValidationError(f"k must be in [1, {self.n}], got {k}")

        dist, idx = self._query_with_ties(t, k)
        order = _rowwise_rank(dist, idx)[:, :k]
        rows = np.arange(t.shape[0])[:, None]
        dist, idx = dist[rows, order], idx[rows, order]
        if single:
            return dist[0], idx[0]
        return dist, idx

    def _query_with_ties(self, t, k):
        # Over-fetch until the k-th distance is strictly inside the fetched
        # radius (or the whole set is fetched), so boundary ties are never cut.
        kq = min(self.n, k + 8)
        dist, idx = self._kquery(t, kq)
        while kq < self.n:
            unresolved = dist[:, k - 1] >= dist[:, kq - 1]
            if not unresolved.any():
                break
            kq = min(self.n, 2 * kq)
            d2, i2 = self._kquery(t[unresolved], kq)
            full_d = np.full((dist.shape[0], kq), np.inf)
            full_i = np.full((dist.shape[0], kq), self.n, dtype=np.int64)
            full_d[:, : dist.shape[1]] = dist
            full_i[:, : dist.shape[1]] = idx
            full_d[unresolved], full_i[unresolved] = d2, i2
            dist, idx = full_d, full_i
        return dist, idx

    def _kquery(self, t, kq):
        dist, idx = self._tree.query(t, k=kq)
        if kq == 1:
            dist, idx = dist[:, None], idx[:, None]
        return dist, idx


def build_knn_index(coords):
    """Build an exact k-nearest-neighbor index (see :class:`KnnIndex`)."""
    return KnnIndex(coords)


def maxmin_order(coords):
    """Greedy max-min ordering of a point set.

    The first point is the one nearest the coordinate centroid; each later
    position takes the point whose minimum distance to all already-ordered
    points is largest. Ties resolve to the lower original index, making the
    ordering deterministic.

    Returns perm, an int64 permutation mapping ordered position to original
    row index. O(n^2) time and O(n) memory, fine up to roughly 50k points.
    """
    coords = as_locations(coords)
    n, d = coords.shape
    perm = np.empty(n, dtype=np.int64)

    centroid = coords.mean(axis=0)
    d0 = ((coords - centroid) ** 2).sum(axis=1)
    first = int(np.argmin(d0))  # argmin takes the first (lowest-index) tie
    perm[0] = first

    if n == 1:
        return perm

    # Squared min-distances for the still-unordered (active) points only;
    # active stays in ascending original order so argmax ties resolve low.
    active = np.concatenate([np.arange(first), np.arange(first + 1, n)])
    cols = [np.ascontiguousarray(coords[active, j]) for j in range(d)]
    mind = np.zeros(active.size)
    for j in range(d):
        mind += (cols[j] - coords[first, j]) ** 2
    removed = 0
    t1 = np.empty(active.size)
    t2 = np.empty(active.size)

    for i in range(1, n):
        j = int(np.argmax(mind))
        nxt = int(active[j])
        perm[i] = nxt
        mind[j] = -np.inf
        removed += 1
        if 2 * removed >= active.size and i < n - 1:
            keep = mind > -np.inf
            active, mind = active[keep], mind[keep]
            cols = [np.ascontiguousarray(c[keep]) for c in cols]
            t1, t2 = np.empty(active.size), np.empty(active.size)
            removed = 0
        m = active.size
        np.subtract(cols[0][:m], coords[nxt, 0], out=t1[:m])
        np.multiply(t1[:m], t1[:m], out=t1[:m])
        for jd in range(1, d):
            np.subtract(cols[jd][:m], coords[nxt, jd], out=t2[:m])
            np.multiply(t2[:m], t2[:m], out=t2[:m])
            np.add(t1[:m], t2[:m], out=t1[:m])
        np.minimum(mind, t1[:m], out=mind)
    return perm


def validate_ordering(perm, n):
    """Check perm is a permutation of 0..n-1; return it as int64."""
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise ValidationError(f"ordering is not a permutation of 0..{n - 1}")
    return perm


class ConditioningSets:
    """Per-position nearest-earlier-neighbor sets with their cap."""

    def __init__(self, sets, cap):
        self.sets = sets
        self.cap = int(cap)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, i):
        return self.sets[i]

    def padded(self):
        """Return (idx, mask): (n, cap) neighbor indices padded with 0 and a
        boolean validity mask. Convenient for vectorized gathers."""
        n = len(self.sets)
        idx = np.zeros((n, self.cap), dtype=np.int64)
        mask = np.zeros((n, self.cap), dtype=bool)
        for i, s in enumerate(self.sets):
            idx[i, : s.size] = s
            mask[i, : s.size] = True
        return idx, mask


def conditioning_sets(coords, perm, cap):
    """Nearest earlier-ordered neighbor sets under a given ordering.

    For ordered position i the set holds the min(i, cap) nearest points
    among positions 0..i-1 (Euclidean distance, ties to the lower original
    index). Sets are lists of original row indices, nearest first; position
    0 gets an empty set.
    """
    coords = as_locations(coords)
    n = coords.shape[0]
    perm = validate_ordering(perm, n)
    cap = int(cap)
    if cap < 1:
        raise ValidationError(f"neighbor cap must be >= 1, got {cap}")

    pos_of = np.empty(n, dtype=np.int64)
    pos_of[perm] = np.arange(n)
    sets = [np.empty(0, dtype=np.int64)]

    # Early positions condition on their full history.
    head = min(cap, n - 1)
    for i in range(1, head + 1):
        prev = perm[:i]
        d = np.sqrt(((coords[prev] - coords[perm[i]]) ** 2).sum(axis=1))
        sets.append(prev[np.lexsort((prev, d))])

    if n - 1 > cap:
        tree = cKDTree(coords)
        tail = np.arange(cap + 1, n)
        sets.extend([None] * tail.size)
        pending = tail
        kq = min(n, 2 * cap + 1)
        while pending.size:
            dist, idx = tree.query(coords[perm[pending]], k=kq)
            dist, idx = np.atleast_2d(dist), np.atleast_2d(idx)
            earlier = pos_of[idx] < pending[:, None]
            d_earlier = np.where(earlier, dist, np.inf)
            count = earlier.sum(axis=1)
            kth = np.sort(d_earlier, axis=1)[:, cap - 1]
            done = (count >= cap) & ((kth < dist[:, -1]) | (kq >= n))
            idx_eff = np.where(earlier, idx, n)  # push non-earlier rows last
            order = np.lexsort((idx_eff, d_earlier), axis=-1)[:, :cap]
            rows = np.arange(len(pending))[:, None]
            chosen = idx[rows, order]
            for r in np.flatnonzero(done):
                sets[pending[r]] = chosen[r].astype(np.int64)
            pending = pending[~done]
            kq = min(n, 2 * kq)

    return ConditioningSets(sets=sets, cap=cap)
