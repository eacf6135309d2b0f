"""Max-margin learning of one nonnegative weight per unordered cluster pair.

With every local metric restricted to ``omega[m] * I``, the DTW distance
along a frozen alignment path is linear in ``omega``:
``D(P, Q) = omega @ phi(P, Q)``, where ``phi[m]`` accumulates the squared
descriptor distances of matched points whose cluster pair has flat index
``m``. The large-margin objective over target-neighbour pairs and impostor
triplets then becomes a linear program in ``omega``.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .clustering import Codebook, fit_kmeans, n_pairs
from .descriptors import DescriptorConfig, extract_all
from .dtw import _accumulate, _backtrack, _sqdist, as_series, validate_path

logger = logging.getLogger(__name__)

DEFAULT_MU_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


# --------------------------------------------------------------------------
# pair features


@numba.njit(cache=True, nogil=True)
def _feature_kernel(P, Q, path, ap, aq, k, out):
    # Neumaier-compensated accumulation per cluster-pair bin
    comp = np.zeros(out.shape[0])
    for t in range(path.shape[0]):
        i, j = path[t, 0], path[t, 1]
        a, b = ap[i], aq[j]
        if a > b:
            a, b = b, a
        m = a * k - a * (a - 1) // 2 + (b - a)
        c = _sqdist(P, Q, i, j)
        s = out[m] + c
        if abs(out[m]) >= abs(c):
            comp[m] += (out[m] - s) + c
        else:
            comp[m] += (c - s) + out[m]
        out[m] = s
    for m in range(out.shape[0]):
        out[m] += comp[m]


def pair_feature(P, Q, path, cb: Optional[Codebook] = None, assign_p=None, assign_q=None):
    """Per-cluster-pair accumulated squared descriptor distances along ``path``.

    Cluster assignments are computed from ``cb`` unless given. Without a
    codebook everything falls in a single cluster and the result is the
    one-entry unit path cost.
    """
    P, Q = as_series(P), as_series(Q)
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"descriptor dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    p = validate_path(path, P.shape[0], Q.shape[0])
    if cb is None:
        k = 1
        assign_p = np.zeros(P.shape[0], dtype=np.int64)
        assign_q = np.zeros(Q.shape[0], dtype=np.int64)
    else:
        k = cb.k
        assign_p = cb.assign_all(P) if assign_p is None else np.asarray(assign_p, dtype=np.int64)
        assign_q = cb.assign_all(Q) if assign_q is None else np.asarray(assign_q, dtype=np.int64)
    out = np.zeros(n_pairs(k))
    _feature_kernel(P, Q, p, assign_p, assign_q, k, out)
    return out


_THREADS = 1


def set_threads(n):
    """Number of worker threads used to fill alignment tables (default 1)."""
    global _THREADS
    _THREADS = max(1, int(n))


def align_path(P, Q):
    return _backtrack(_accumulate(P, Q))


def _rows(fn, n):
    # kernels release the GIL; row order is kept so output is deterministic
    if _THREADS == 1 or n < 2:
        return [fn(a) for a in range(n)]
    with ThreadPoolExecutor(max_workers=_THREADS) as pool:
        return list(pool.map(fn, range(n)))


def path_table(A, B=None):
    """Unit-cost DTW paths between every series of ``A`` and every series of ``B``.

    With ``B=None`` the table is over ``A`` x ``A``: only ``a < b`` is aligned
    and the lower triangle holds transposed paths.
    """
    A = [as_series(x) for x in A]
    if B is None:
        n = len(A)
        upper = _rows(lambda a: [align_path(A[a], A[b]) for b in range(a + 1, n)], n)
        table = [[None] * n for _ in range(n)]
        for a in range(n):
            m = A[a].shape[0]
            table[a][a] = np.column_stack([np.arange(m), np.arange(m)])
            for b, path in enumerate(upper[a], start=a + 1):
                table[a][b] = path
                table[b][a] = path[:, ::-1].copy()
        return table
    B = [as_series(x) for x in B]
    return _rows(lambda a: [align_path(A[a], y) for y in B], len(A))


def feature_table(paths, A, B, assign_A, assign_B, k):
    """Stack of pair features, shape ``(len(A), len(B), k(k+1)/2)``."""
    A = [as_series(x) for x in A]
    B = [as_series(x) for x in B]
    out = np.zeros((len(A), len(B), n_pairs(k)))
    for a, row in enumerate(paths):
        for b, path in enumerate(row):
            _feature_kernel(A[a], B[b], path, assign_A[a], assign_B[b], k, out[a, b])
    return out


# --------------------------------------------------------------------------
# neighbours and triplets


def select_target_neighbors(dists, labels, kappa=3):
    """The ``kappa`` nearest same-class points of every point (ties -> lower index)."""
    dists = np.asarray(dists, dtype=float)
    labels = np.asarray(labels)
    targets = {}
    for i in range(labels.size):
        same = np.flatnonzero((labels == labels[i]) & (np.arange(labels.size) != i))
        if same.size == 0:
            logger.warning("point %d is the only member of class %s: no target neighbours",
                           i, labels[i])
        order = np.argsort(dists[i, same], kind="stable")
        targets[i] = [int(j) for j in same[order[:kappa]]]
    return targets


def build_triplets(targets, labels, dists, percentile=90.0):
    """Impostor triplets ``(i, j, l)`` as an ``(n, 3)`` int array.

    For target pair ``(i, j)``, every differently labeled ``l`` with
    ``dists[i, l] <= dists[i, j] + slack`` is kept, where ``slack`` is the
    given percentile of all target-pair distances. When no impostor
    qualifies, the nearest differently labeled point is used instead.
    """
    dists = np.asarray(dists, dtype=float)
    labels = np.asarray(labels)
    pairs = [(i, j) for i, js in sorted(targets.items()) for j in js]
    if not pairs:
        return np.empty((0, 3), dtype=np.int64)
    slack = float(np.percentile([dists[i, j] for i, j in pairs], percentile))
    rows = []
    for i, j in pairs:
        others = np.flatnonzero(labels != labels[i])
        if others.size == 0:
            continue
        close = others[dists[i, others] <= dists[i, j] + slack]
        if close.size == 0:
            close = others[[int(np.argmin(dists[i, others]))]]
        rows.extend((i, j, int(l)) for l in close)
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


# --------------------------------------------------------------------------
# linear program


def lp_objective(omega, pull, diff, mu):
    """``(1-mu) * sum(pull @ omega) + mu * sum(max(0, 1 - diff @ omega))``."""
    omega = np.asarray(omega, dtype=float)
    pull = np.asarray(pull, dtype=float).reshape(-1, omega.size)
    diff = np.asarray(diff, dtype=float).reshape(-1, omega.size)
    hinge = np.maximum(0.0, 1.0 - diff @ omega)
    return (1.0 - mu) * float((pull @ omega).sum()) + mu * float(hinge.sum())


def solve_metric_lp(pull, diff, mu):
    """Nonnegative weights minimizing :func:`lp_objective`.

    ``pull`` holds the features of target pairs ``phi(i, j)``, ``diff`` the
    per-triplet differences ``phi(i, l) - phi(i, j)``. The hinge terms are
    handled as epigraph variables and the LP is solved with HiGHS. Features
    are rescaled internally; the objective is exactly covariant under that
    rescaling, so only conditioning changes.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    pull = np.atleast_2d(np.asarray(pull, dtype=float))
    diff = np.asarray(diff, dtype=float)
    n_var = pull.shape[1]
    diff = diff.reshape(-1, n_var)
    if not (np.all(np.isfinite(pull)) and np.all(np.isfinite(diff))):
        raise ValueError("features must be finite")
    n_tri = diff.shape[0]
    c_omega = (1.0 - mu) * pull.sum(axis=0)
    if n_tri == 0:
        return np.zeros(n_var)

    pull_totals = pull.sum(axis=1)
    if np.any(pull_totals > 0):
        scale = float(np.median(pull_totals[pull_totals > 0]))
    else:
        scale = float(np.abs(diff).max()) or 1.0

    c = np.concatenate([c_omega / scale, np.full(n_tri, mu)])
    A = sp.hstack([sp.csr_matrix(-diff / scale), -sp.identity(n_tri, format="csr")], format="csr")
    b = -np.ones(n_tri)
    res = linprog(c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return np.maximum(res.x[:n_var], 0.0) / scale


# --------------------------------------------------------------------------
# model and fitting


@dataclass(frozen=True)
class FitConfig:
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    align_descriptor: Optional[DescriptorConfig] = None  # None: same as descriptor
    k: int = 5
    kappa: int = 3
    mu_grid: tuple = DEFAULT_MU_GRID
    seed: int = 0
    n_folds: int = 5
    impostor_percentile: float = 90.0

    @property
    def alignment(self):
        return self.align_descriptor or self.descriptor


@dataclass(frozen=True, eq=False)
class MetricModel:
    codebook: Codebook
    omega: np.ndarray
    mu: float
    descriptor_cfg: DescriptorConfig
    align_cfg: Optional[DescriptorConfig] = None
    cv_accuracy: dict = field(default_factory=dict)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.shape != (self.codebook.n_pairs,):
            raise ValueError(
                f"omega has {omega.size} entries, expected {self.codebook.n_pairs} for k={self.codebook.k}"
            )
        if np.any(omega < 0):
            raise ValueError("omega must be entrywise nonnegative")
        object.__setattr__(self, "omega", omega)

    @property
    def alignment(self):
        return self.align_cfg or self.descriptor_cfg

    def to_json(self):
        return json.dumps(
            {
                "codebook": self.codebook.to_dict(),
                "omega": self.omega.tolist(),
                "mu": self.mu,
                "descriptor_cfg": self.descriptor_cfg.to_dict(),
                "align_descriptor_cfg": None if self.align_cfg is None else self.align_cfg.to_dict(),
                "cv_accuracy": {str(k): v for k, v in self.cv_accuracy.items()},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        align = obj.get("align_descriptor_cfg")
        return cls(
            codebook=Codebook.from_dict(obj["codebook"]),
            omega=np.asarray(obj["omega"], dtype=float),
            mu=float(obj["mu"]),
            descriptor_cfg=DescriptorConfig.from_dict(obj["descriptor_cfg"]),
            align_cfg=None if align is None else DescriptorConfig.from_dict(align),
            cv_accuracy={float(k): v for k, v in obj.get("cv_accuracy", {}).items()},
        )


def stratified_folds(labels, n_folds, seed=0):
    """Fold id per sample; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        folds[members] = (np.arange(members.size) + offset) % n_folds
        offset += members.size
    return folds


def _problem(features, labels, idx, kappa, percentile):
    """Pull and difference features of the LP restricted to samples ``idx``."""
    sub = features[np.ix_(idx, idx)]
    dists = sub.sum(axis=-1)
    lab = labels[idx]
    targets = select_target_neighbors(dists, lab, kappa)
    triplets = build_triplets(targets, lab, dists, percentile)
    pull = np.array([sub[i, j] for i, js in sorted(targets.items()) for j in js])
    pull = pull.reshape(-1, features.shape[-1])
    diff = sub[triplets[:, 0], triplets[:, 2]] - sub[triplets[:, 0], triplets[:, 1]]
    return pull, diff


def nearest_labels(features, omega, train_labels):
    """1NN labels given query-by-train features and weights (ties -> lower index)."""
    return np.asarray(train_labels)[np.argmin(features @ omega, axis=1)]


def fit_weights(features, labels, cfg: FitConfig = FitConfig()):
    """Choose ``mu`` by stratified cross-validation and solve for ``omega``.

    ``features`` is the ``(n, n, k(k+1)/2)`` pair-feature tensor of the
    training set. Returns ``(omega, mu, cv_accuracy)``.
    """
    labels = np.asarray(labels)
    n = labels.size
    everything = np.arange(n)
    grid = sorted(float(m) for m in cfg.mu_grid)
    cv = {}
    if len(grid) == 1:
        best = grid[0]
    else:
        smallest = min(np.bincount(labels)[np.unique(labels)])
        n_folds = min(cfg.n_folds, int(smallest))
        if n_folds < cfg.n_folds:
            logger.info("reducing cross-validation to %d folds (smallest class has %d members)",
                        n_folds, smallest)
        if n_folds < 2:
            best = grid[len(grid) // 2]
            logger.warning("too few samples per class to cross-validate mu; using %g", best)
        else:
            folds = stratified_folds(labels, n_folds, cfg.seed)
            correct = dict.fromkeys(grid, 0)
            for f in range(n_folds):
                tr, te = everything[folds != f], everything[folds == f]
                pull, diff = _problem(features, labels, tr, cfg.kappa, cfg.impostor_percentile)
                query = features[np.ix_(te, tr)]
                for mu in grid:
                    omega = solve_metric_lp(pull, diff, mu)
                    pred = nearest_labels(query, omega, labels[tr])
                    correct[mu] += int((pred == labels[te]).sum())
            cv = {mu: correct[mu] / n for mu in grid}
            best = max(grid, key=lambda mu: (cv[mu], -mu))
    pull, diff = _problem(features, labels, everything, cfg.kappa, cfg.impostor_percentile)
    return solve_metric_lp(pull, diff, best), best, cv


def fit(train, cfg: FitConfig = FitConfig()):
    """Learn a MetricModel from a Dataset (or a list of LabeledSequence)."""
    records = list(getattr(train, "train", train))
    labels = np.array([r.label for r in records])
    learn = [extract_all(r.values, cfg.descriptor) for r in records]
    if cfg.align_descriptor is None or cfg.align_descriptor == cfg.descriptor:
        align = learn
    else:
        align = [extract_all(r.values, cfg.align_descriptor) for r in records]
    paths = path_table(align)
    codebook = fit_kmeans(np.vstack(learn), cfg.k, seed=cfg.seed)
    assignments = [codebook.assign_all(d) for d in learn]
    features = feature_table(paths, learn, learn, assignments, assignments, codebook.k)
    omega, mu, cv = fit_weights(features, labels, cfg)
    return MetricModel(
        codebook=codebook,
        omega=omega,
        mu=mu,
        descriptor_cfg=cfg.descriptor,
        align_cfg=cfg.align_descriptor,
        cv_accuracy=cv,
    )
