"""Dynamic time warping over descriptor series.

Alignment uses the three unit steps (1,0), (1,1), (0,1) with no warping
window. Point-pair cost is the squared Euclidean distance between
descriptor vectors. Path costs are accumulated with ``math.fsum`` so a
reported distance is the correctly rounded sum of the costs on its path,
independent of summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .clustering import pair_index_array
from .descriptors import point_series


class PathError(ValueError):
    """Raised for alignment paths violating boundary or step constraints."""


@dataclass(frozen=True, eq=False)
class DtwResult:
    path: np.ndarray  # (l, 2) int array of (i, j) pairs
    distance: float


@numba.njit(cache=True, nogil=True)
def _sqdist(P, Q, i, j):
    acc = 0.0
    for k in range(P.shape[1]):
        diff = P[i, k] - Q[j, k]
        acc += diff * diff
    return acc


@numba.njit(cache=True, nogil=True)
def _accumulate(P, Q):
    n, m = P.shape[0], Q.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            c = _sqdist(P, Q, i, j)
            if i == 0 and j == 0:
                D[i, j] = c
            elif i == 0:
                D[i, j] = c + D[i, j - 1]
            elif j == 0:
                D[i, j] = c + D[i - 1, j]
            else:
                best = D[i - 1, j - 1]
                if D[i - 1, j] < best:
                    best = D[i - 1, j]
                if D[i, j - 1] < best:
                    best = D[i, j - 1]
                D[i, j] = c + best
    return D


@numba.njit(cache=True, nogil=True)
def _backtrack(D):
    n, m = D.shape
    path = np.empty((n + m - 1, 2), dtype=np.int64)
    i, j = n - 1, m - 1
    k = 0
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            # ties: diagonal, then up (i-1, j), then left (i, j-1)
            diag, up, left = D[i - 1, j - 1], D[i - 1, j], D[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return path[: k + 1][::-1].copy()


@numba.njit(cache=True, nogil=True)
def _path_costs(P, Q, path):
    out = np.empty(path.shape[0])
    for k in range(path.shape[0]):
        out[k] = _sqdist(P, Q, path[k, 0], path[k, 1])
    return out


def as_series(x):
    """Coerce a descriptor series (or a plain 1-D sequence) to a float 2-D array."""
    if hasattr(x, "values") and not isinstance(x, np.ndarray):
        return point_series(x)
    arr = np.ascontiguousarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("descriptor series must be a non-empty (length, dim) array")
    return arr


def _check_pair(P, Q):
    P, Q = as_series(P), as_series(Q)
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"descriptor dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    return P, Q


def validate_path(path, n, m):
    """Check boundary, monotonicity and unit-step conditions; return an int array."""
    p = np.asarray(path, dtype=np.int64)
    if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] == 0:
        raise PathError("path must be a non-empty list of (i, j) pairs")
    if tuple(p[0]) != (0, 0):
        raise PathError(f"path starts at {tuple(p[0])}, expected (0, 0)")
    if tuple(p[-1]) != (n - 1, m - 1):
        raise PathError(f"path ends at {tuple(p[-1])}, expected {(n - 1, m - 1)}")
    steps = np.diff(p, axis=0)
    ok = np.isin(steps, (0, 1)).all(axis=1) & (steps.sum(axis=1) > 0)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise PathError(f"invalid step {tuple(steps[bad])} at position {bad}")
    return p


def is_valid_path(path, n, m):
    try:
        validate_path(path, n, m)
    except PathError:
        return False
    return True


def align(P, Q):
    """Minimum-cost DTW alignment of two descriptor series."""
    P, Q = _check_pair(P, Q)
    path = _backtrack(_accumulate(P, Q))
    return DtwResult(path=path, distance=math.fsum(_path_costs(P, Q, path)))


def accumulated_cost(P, Q):
    """Full accumulated-cost table ``D(i, j)`` of the DP recursion."""
    P, Q = _check_pair(P, Q)
    return _accumulate(P, Q)


def point_costs(P, Q, path):
    """Squared descriptor distance of every matched pair on ``path``."""
    P, Q = _check_pair(P, Q)
    p = validate_path(path, P.shape[0], Q.shape[0])
    return _path_costs(P, Q, p)


def path_cost(P, Q, path, weights=None, assign_p=None, assign_q=None, k=None):
    """Cost accumulated along ``path``.

    Without ``weights`` this is the plain sum of squared descriptor distances.
    With a cluster-pair weight vector, each term is scaled by the weight of
    the unordered cluster pair ``{assign_p[i], assign_q[j]}``.
    """
    costs = point_costs(P, Q, path)
    if weights is None:
        return math.fsum(costs)
    if assign_p is None or assign_q is None:
        raise ValueError("weighted path cost needs cluster assignments for both series")
    weights = np.asarray(weights, dtype=float)
    if k is None:
        k = int(round((math.sqrt(8 * weights.size + 1) - 1) / 2))
    p = np.asarray(path)
    idx = pair_index_array(np.asarray(assign_p)[p[:, 0]], np.asarray(assign_q)[p[:, 1]], k)
    return math.fsum(weights[idx] * costs)


def pairwise_dtw(series):
    """Symmetric matrix of DtwResult for every pair in ``series``.

    Only ``a < b`` is aligned; entry ``(b, a)`` reuses the transposed path.
    """
    series = [as_series(s) for s in series]
    dims = {s.shape[1] for s in series}
    if len(dims) > 1:
        raise ValueError(f"descriptor dimensions differ: {sorted(dims)}")
    n = len(series)
    out = np.empty((n, n), dtype=object)
    for a in range(n):
        m = series[a].shape[0]
        out[a, a] = DtwResult(np.column_stack([np.arange(m), np.arange(m)]), 0.0)
        for b in range(a + 1, n):
            res = align(series[a], series[b])
            out[a, b] = res
            out[b, a] = DtwResult(res.path[:, ::-1].copy(), res.distance)
    return out


def distance_matrix(results):
    return np.vectorize(lambda r: r.distance, otypes=[float])(results)


def write_path_csv(path, fh):
    fh.write("i,j\n")
    for i, j in np.asarray(path):
        fh.write(f"{i},{j}\n")
