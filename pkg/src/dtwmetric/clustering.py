"""k-means codebook over descriptors and the unordered cluster-pair index."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MAX_ITER = 100
MAX_FIT_POINTS = 100_000


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (k, dim)

    def __post_init__(self):
        c = np.array(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("codebook needs at least one centroid")
        if not np.all(np.isfinite(c)):
            raise ValueError("codebook centroids must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "centroids", c)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    @property
    def n_pairs(self):
        return n_pairs(self.k)

    def assign_all(self, X):
        """Nearest-centroid index for each row of ``X`` (ties -> lowest index)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) descriptors, got {X.shape}")
        return _nearest(X, self.centroids)

    def to_dict(self):
        return {"k": self.k, "dim": self.dim, "centroids": self.centroids.tolist()}

    @classmethod
    def from_dict(cls, d):
        cb = cls(np.asarray(d["centroids"], dtype=float).reshape(d["k"], d["dim"]))
        return cb

    def to_json(self):
        return json.dumps(self.to_dict())


def _sqdists(X, C):
    # exact differences rather than the |x|^2 - 2xc + |c|^2 expansion, so
    # equal distances compare equal and ties resolve to the lowest index
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def _nearest(X, C, chunk=8192):
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], chunk):
        out[start : start + chunk] = np.argmin(_sqdists(X[start : start + chunk], C), axis=1)
    return out


def _kmeanspp(X, k, rng):
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(X.shape[0])]
    closest = _sqdists(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        probs = closest / total
        centers[c] = X[rng.choice(X.shape[0], p=probs)]
        closest = np.minimum(closest, _sqdists(X, centers[c : c + 1])[:, 0])
    return centers


def fit_kmeans(descriptors, k, seed=0, max_iter=MAX_ITER, max_points=MAX_FIT_POINTS):
    """Lloyd's k-means from k-means++ seeding.

    Stops at an assignment fixpoint or after ``max_iter`` updates. A cluster
    that empties is reseeded with the point farthest from its own centroid.
    More than ``max_points`` descriptors are uniformly subsampled first.
    """
    X = np.asarray(descriptors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("descriptors must be a non-empty (n, dim) array")
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    if X.shape[0] > max_points:
        X = X[np.sort(rng.choice(X.shape[0], size=max_points, replace=False))]
    n_distinct = np.unique(X, axis=0).shape[0]
    if k > n_distinct:
        raise ValueError(f"k={k} exceeds the number of distinct descriptors ({n_distinct})")

    centers = _kmeanspp(X, k, rng)
    labels = None
    for it in range(max_iter):
        new_labels = _nearest(X, centers)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        empty = np.flatnonzero(~nonempty)
        for c in empty:
            own = ((X - centers[labels]) ** 2).sum(axis=1)
            far = int(np.argmax(own))
            logger.debug("k-means: reseeding empty cluster %d with point %d", c, far)
            centers[c] = X[far]
            labels[far] = c
        if empty.size:
            # reseeding moved points without updating means; never stop here
            labels = None
    else:
        logger.info("k-means stopped after %d iterations without a fixpoint", max_iter)
    return Codebook(centers)


def assign(cb: Codebook, v):
    """Index of the centroid nearest to ``v``; ties go to the lowest index."""
    v = np.asarray(v, dtype=float)
    if v.shape != (cb.dim,):
        raise ValueError(f"expected a vector of dimension {cb.dim}, got shape {v.shape}")
    return int(np.argmin(((cb.centroids - v) ** 2).sum(axis=1)))


def n_pairs(k):
    return k * (k + 1) // 2


def pair_index(a, b, k):
    """Flat index of the unordered cluster pair ``{a, b}`` in ``0..k(k+1)/2 - 1``.

    Pairs are enumerated row by row over the upper triangle:
    ``(0,0), (0,1), ..., (0,k-1), (1,1), (1,2), ...``.
    """
    if not (0 <= a < k and 0 <= b < k):
        raise ValueError(f"cluster indices ({a}, {b}) out of range for k={k}")
    lo, hi = (a, b) if a <= b else (b, a)
    return lo * k - lo * (lo - 1) // 2 + (hi - lo)


def pair_index_array(a, b, k):
    """Vectorized :func:`pair_index`."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size and (min(a.min(), b.min()) < 0 or max(a.max(), b.max()) >= k):
        raise ValueError(f"cluster indices out of range for k={k}")
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * k - lo * (lo - 1) // 2 + (hi - lo)


def pair_of_index(m, k):
    """Inverse of :func:`pair_index`: the ``(lo, hi)`` pair with flat index ``m``."""
    for lo in range(k):
        row = k - lo
        if m < row:
            return lo, lo + m
        m -= row
    raise ValueError(f"pair index out of range for k={k}")
