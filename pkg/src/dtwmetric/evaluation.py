"""Experiment harness: paired error comparisons, significance, warp simulation."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm, rankdata

from .clustering import fit_kmeans
from .dataset import Dataset, Sequence, load_ucr_split
from .descriptors import KINDS, DescriptorConfig, extract_all, point_series
from .dtw import PathError, align, validate_path
from .learner import FitConfig, feature_table, fit_weights, nearest_labels, path_table

logger = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    """Too few nonzero paired differences for a signed-rank test."""


@dataclass(frozen=True)
class ExperimentResult:
    dataset: str
    condition: str
    error_euclidean: float
    error_learned: float
    mu: float = float("nan")

    def __post_init__(self):
        for e in (self.error_euclidean, self.error_learned):
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"error rate {e} outside [0, 1]")

    @property
    def improvement(self):
        return self.error_euclidean - self.error_learned


# --------------------------------------------------------------------------
# Wilcoxon signed-rank test


def _exact_two_sided(doubled_ranks, w2):
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    probs = counts / counts.sum()
    lower = probs[: w2 + 1].sum()
    upper = probs[w2:].sum()
    return min(1.0, 2.0 * min(lower, upper))


def wilcoxon_signed_rank(x, y, exact_max_n=12):
    """Two-sided p-value of the Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get average ranks. Up
    to ``exact_max_n`` nonzero differences the p-value comes from the exact
    sign-flip distribution of the positive rank sum; beyond that from the
    normal approximation with tie and continuity corrections.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n < 5:
        raise InsufficientDataError(f"only {n} nonzero paired differences (need >= 5)")
    ranks = rankdata(np.abs(d))
    w_plus = ranks[d > 0].sum()
    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(np.int64)
        return _exact_two_sided(doubled, int(round(2 * w_plus)))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts**3 - tie_counts).sum() / 48.0
    if var <= 0:
        return 1.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


# --------------------------------------------------------------------------
# synthetic warps and alignment error


@dataclass(frozen=True, eq=False)
class WarpedPair:
    original: Sequence
    warped: Sequence
    truth: np.ndarray  # (l, 2) path pairing original index i with warped index j


def _rasterize(preimage_rows):
    """Unit-step path visiting ``(preimage_rows[j], j)`` for every column ``j``."""
    pairs = [(int(preimage_rows[0]), 0)]
    for j in range(1, len(preimage_rows)):
        i_prev, i_next = pairs[-1][0], int(preimage_rows[j])
        for i in range(i_prev + 1, i_next):
            pairs.append((i, j - 1))
        pairs.append((i_next, j))
    return np.array(pairs, dtype=np.int64)


def simulate_warped_pair(s, seed=0, stretch_strength=0.3, amplitude=True, n_segments=5):
    """Stretch ``s`` by a random monotone piecewise-linear time warp.

    The warped series has ``ceil(L * (1 + u))`` samples, ``u ~ U(0, strength)``.
    Segment slopes are drawn from ``U(1 - strength, 1 + strength)`` and
    renormalized so the warp maps the first and last output samples onto the
    first and last input samples. With ``amplitude=True`` the values are also
    multiplied by a slow sinusoid in ``[0.9, 1.1]``. The ground-truth path
    pairs every output index with the rounded preimage position.
    """
    seq = s if isinstance(s, Sequence) else Sequence(s)
    values = seq.values
    n = values.size
    if n < 10:
        raise ValueError("sequence must have length >= 10")
    if not 0.0 < stretch_strength <= 1.0:
        raise ValueError(f"stretch_strength must be in (0, 1], got {stretch_strength}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, stretch_strength)
    # the small guard keeps vanishing stretches from adding a sample through rounding
    m = max(n, math.ceil(n * (1.0 + u) - 1e-9))
    knots_out = np.linspace(0.0, m - 1, n_segments + 1)
    slopes = rng.uniform(1.0 - stretch_strength, 1.0 + stretch_strength, size=n_segments)
    increments = slopes * np.diff(knots_out)
    knots_in = np.concatenate([[0.0], np.cumsum(increments)]) * (n - 1) / increments.sum()
    knots_in[-1] = n - 1
    preimage = np.interp(np.arange(m), knots_out, knots_in)
    warped = np.interp(preimage, np.arange(n), values)
    freq, phase = rng.uniform(0.5, 2.0), rng.uniform(0.0, 2 * np.pi)
    if amplitude:
        warped = warped * (1.0 + 0.1 * np.sin(2 * np.pi * freq * np.arange(m) / (m - 1) + phase))
    rows = np.floor(preimage + 0.5).astype(np.int64)
    truth = _rasterize(rows)
    validate_path(truth, n, m)
    return WarpedPair(original=seq, warped=Sequence(warped, id=f"{seq.id}~warp{seed}"), truth=truth)


def alignment_error(found, truth):
    """Mean, over found pairs ``(i, j)``, of the column distance from ``j`` to
    the nearest truth pair in row ``i``.
    """
    found = np.asarray(found, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if found.size == 0 or truth.size == 0:
        raise PathError("paths must be non-empty")
    n_rows = truth[:, 0].max() + 1
    if found[:, 0].min() < 0 or found[:, 0].max() + 1 != n_rows or truth[:, 0].min() != 0:
        raise PathError("paths cover different row ranges")
    lo = np.full(n_rows, np.iinfo(np.int64).max)
    hi = np.full(n_rows, np.iinfo(np.int64).min)
    np.minimum.at(lo, truth[:, 0], truth[:, 1])
    np.maximum.at(hi, truth[:, 0], truth[:, 1])
    if np.any(lo > hi):
        raise PathError("truth path skips a row")
    i, j = found[:, 0], found[:, 1]
    dev = np.maximum(0, np.maximum(lo[i] - j, j - hi[i]))
    return float(dev.mean())


ALIGNERS = ("point",) + KINDS


def _aligner_series(values, method, window_length=30):
    if method == "point":
        return point_series(values)
    return extract_all(values, DescriptorConfig(kind=method, window_length=window_length))


def alignment_study(sequences, n_pairs=100, seed=0, stretch_strength=0.3, methods=ALIGNERS):
    """Mean alignment error per aligner over ``n_pairs`` simulated warps.

    Base sequences are drawn with replacement from ``sequences``. Returns
    ``{method: array of per-pair errors}``.
    """
    rng = np.random.default_rng(seed)
    sequences = list(sequences)
    errors = {m: [] for m in methods}
    for t in range(n_pairs):
        base = sequences[int(rng.integers(len(sequences)))]
        pair = simulate_warped_pair(base, seed=int(rng.integers(2**31)),
                                    stretch_strength=stretch_strength)
        for method in methods:
            found = align(_aligner_series(pair.original.values, method),
                          _aligner_series(pair.warped.values, method)).path
            errors[method].append(alignment_error(found, pair.truth))
    return {m: np.array(v) for m, v in errors.items()}


# --------------------------------------------------------------------------
# per-dataset workspace


def _key(cfg):
    return None if cfg is None else tuple(sorted(cfg.to_dict().items()))


@dataclass(eq=False)
class Workspace:
    """Caches descriptors, alignment paths and pair features of one dataset.

    Alignment descriptor ``None`` means raw single-point values (plain
    1NN-DTW).
    """

    dataset: Dataset
    _desc: dict = field(default_factory=dict)
    _paths: dict = field(default_factory=dict)
    _feats: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.dataset.name

    def descriptors(self, cfg):
        key = _key(cfg)
        if key not in self._desc:
            conv = point_series if cfg is None else (lambda v: extract_all(v, cfg))
            self._desc[key] = (
                [conv(r.values) for r in self.dataset.train],
                [conv(r.values) for r in self.dataset.test],
            )
        return self._desc[key]

    def paths(self, align_cfg):
        key = _key(align_cfg)
        if key not in self._paths:
            train, test = self.descriptors(align_cfg)
            self._paths[key] = (path_table(train), path_table(test, train))
        return self._paths[key]

    def features(self, align_cfg, learn_cfg, k, seed=0):
        """``(train x train, test x train)`` pair features; k=0 means unit cost only."""
        key = (_key(align_cfg), _key(learn_cfg), k, seed)
        if key not in self._feats:
            train_paths, test_paths = self.paths(align_cfg)
            train, test = self.descriptors(learn_cfg)
            if k == 0:
                a_train = [np.zeros(d.shape[0], dtype=np.int64) for d in train]
                a_test = [np.zeros(d.shape[0], dtype=np.int64) for d in test]
                kk = 1
            else:
                cb = fit_kmeans(np.vstack(train), k, seed=seed)
                a_train = [cb.assign_all(d) for d in train]
                a_test = [cb.assign_all(d) for d in test]
                kk = k
            self._feats[key] = (
                feature_table(train_paths, train, train, a_train, a_train, kk),
                feature_table(test_paths, test, train, a_test, a_train, kk),
            )
        return self._feats[key]

    def unit_error(self, align_cfg, learn_cfg):
        _, f_test = self.features(align_cfg, learn_cfg, 0)
        pred = nearest_labels(f_test, np.ones(1), self.dataset.train_labels())
        return float(np.mean(pred != self.dataset.test_labels()))

    def compare(self, align_cfg, learn_cfg, fit_cfg: FitConfig, condition=""):
        """Euclidean-vs-learned test errors with paths from ``align_cfg``."""
        f_train, f_test = self.features(align_cfg, learn_cfg, fit_cfg.k, fit_cfg.seed)
        y_train, y_test = self.dataset.train_labels(), self.dataset.test_labels()
        unit = np.ones(f_train.shape[-1])
        err_unit = float(np.mean(nearest_labels(f_test, unit, y_train) != y_test))
        omega, mu, _ = fit_weights(f_train, y_train, fit_cfg)
        err_learned = float(np.mean(nearest_labels(f_test, omega, y_train) != y_test))
        return ExperimentResult(self.name, condition, err_unit, err_learned, mu)


def _load(item, normalize=False):
    if isinstance(item, Workspace):
        return item
    if isinstance(item, Dataset):
        return Workspace(item)
    train_path, test_path = item
    return Workspace(load_ucr_split(train_path, test_path, normalize=normalize))


def run_comparison(datasets, align_descriptor, learn_descriptor=None, k=5, seed=0,
                   condition=None, normalize=False, **fit_kwargs):
    """Paired Euclidean/learned errors for every dataset that loads.

    Items of ``datasets`` are Dataset or Workspace objects, or
    ``(train_path, test_path)`` tuples. Failures are logged and skipped.
    """
    learn_descriptor = learn_descriptor or align_descriptor
    cfg = FitConfig(descriptor=learn_descriptor, align_descriptor=align_descriptor,
                    k=k, seed=seed, **fit_kwargs)
    if condition is None:
        condition = _condition_label(align_descriptor, learn_descriptor, k)
    results = []
    for item in datasets:
        try:
            ws = _load(item, normalize)
            results.append(ws.compare(align_descriptor, learn_descriptor, cfg, condition))
        except Exception as exc:  # noqa: BLE001 - a batch never aborts on one dataset
            logger.warning("skipping dataset %r: %s", getattr(item, "name", item), exc)
    return sorted(results, key=lambda r: r.dataset)


def _condition_label(align_cfg, learn_cfg, k):
    a = "point" if align_cfg is None else align_cfg.kind
    b = "point" if learn_cfg is None else learn_cfg.kind
    return f"align={a},learn={b},k={k}"


# --------------------------------------------------------------------------
# study protocols

STUDIES = ("fig3", "fig4", "fig5", "fig6")


def run_study(name, datasets, seed=0, ks=(5, 10, 15, 20, 25, 30), k=5,
              descriptor_params=None, normalize=False, **fit_kwargs):
    """Run one of the named protocols and return its ExperimentResults.

    fig3: align and learn under the same descriptor, for each descriptor.
    fig4: align under each descriptor, learn under the derivative descriptor.
    fig5: derivative descriptor, sweep the number of clusters over ``ks``.
    fig6: hog1d with and without learning against plain point-wise 1NN-DTW;
          baseline rows carry the baseline error in both columns.
    """
    if name not in STUDIES:
        raise ValueError(f"unknown study {name!r}; expected one of {STUDIES}")
    params = dict(descriptor_params or {})
    cfg = {kind: DescriptorConfig(kind=kind, **params) for kind in KINDS}
    spaces = []
    for item in datasets:
        try:
            spaces.append(_load(item, normalize))
        except Exception as exc:  # noqa: BLE001
            logger.warning("skipping dataset %r: %s", item, exc)
    results = []
    if name == "fig3":
        for kind in KINDS:
            results += run_comparison(spaces, cfg[kind], cfg[kind], k=k, seed=seed,
                                      condition=kind, **fit_kwargs)
    elif name == "fig4":
        for kind in KINDS:
            results += run_comparison(spaces, cfg[kind], cfg["derivative"], k=k, seed=seed,
                                      condition=f"align={kind}", **fit_kwargs)
    elif name == "fig5":
        for kk in ks:
            results += run_comparison(spaces, cfg["derivative"], cfg["derivative"], k=kk,
                                      seed=seed, condition=f"k={kk}", **fit_kwargs)
    else:
        results += run_comparison(spaces, cfg["hog1d"], cfg["hog1d"], k=k, seed=seed,
                                  condition="hog1d", **fit_kwargs)
        for ws in spaces:
            try:
                err = ws.unit_error(None, None)
            except Exception as exc:  # noqa: BLE001
                logger.warning("skipping baseline on %r: %s", ws.name, exc)
                continue
            results.append(ExperimentResult(ws.name, "baseline", err, err))
    return results


def win_draw_loss(a, b):
    """Counts of ``a < b``, ``a == b``, ``a > b`` over paired error rates."""
    a, b = np.asarray(a), np.asarray(b)
    return int((a < b).sum()), int((a == b).sum()), int((a > b).sum())


def _p_value(x, y):
    try:
        return wilcoxon_signed_rank(x, y)
    except InsufficientDataError:
        return None


def summarize(results):
    """Per-condition p-value, win/draw/loss and median improvement."""
    out = {}
    conditions = sorted({r.condition for r in results})
    baseline = {r.dataset: r.error_euclidean for r in results if r.condition == "baseline"}
    for cond in conditions:
        rows = sorted((r for r in results if r.condition == cond), key=lambda r: r.dataset)
        eu = [r.error_euclidean for r in rows]
        le = [r.error_learned for r in rows]
        w, d, l = win_draw_loss(le, eu)
        entry = {
            "n_datasets": len(rows),
            "wilcoxon_p": _p_value(eu, le),
            "learned_vs_euclidean": {"win": w, "draw": d, "loss": l},
            "median_improvement": float(np.median(np.subtract(eu, le))) if rows else None,
        }
        if baseline and cond != "baseline":
            paired = [r for r in rows if r.dataset in baseline]
            base = [baseline[r.dataset] for r in paired]
            for label, errs in (("euclidean", [r.error_euclidean for r in paired]),
                                ("learned", [r.error_learned for r in paired])):
                w, d, l = win_draw_loss(errs, base)
                entry[f"{label}_vs_baseline"] = {"win": w, "draw": d, "loss": l,
                                                 "wilcoxon_p": _p_value(base, errs)}
        out[cond] = entry
    return out


def write_results_csv(results, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["dataset", "condition", "error_euclidean", "error_learned"])
    for r in results:
        writer.writerow([r.dataset, r.condition, repr(r.error_euclidean), repr(r.error_learned)])


def write_outputs(results, out_dir, stem):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{stem}.csv", "w") as fh:
        write_results_csv(results, fh)
    with open(out_dir / f"{stem}_summary.json", "w") as fh:
        json.dump(summarize(results), fh, indent=2, sort_keys=True)
        fh.write("\n")
