"""1-nearest-neighbour classification under unit or learned DTW metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorConfig, extract_all, point_series
from .learner import MetricModel, feature_table, path_table


@dataclass(frozen=True)
class Prediction:
    test_id: str
    predicted_label: int
    nearest_train_id: str
    distance: float
    true_label: int = -1


def _descriptors(records, cfg):
    if cfg is None:
        return [point_series(r.values) for r in records]
    return [extract_all(r.values, cfg) for r in records]


def distance_table(test, train, model):
    """Test-by-train DTW distances.

    ``model`` is a MetricModel, a DescriptorConfig (unit metric on that
    descriptor) or None (unit metric on raw sample values, i.e. plain
    1NN-DTW). Paths always come from unit-cost alignment under the
    alignment descriptor; learned weights only re-weight along them.
    """
    if isinstance(model, MetricModel):
        learn_cfg, align_cfg = model.descriptor_cfg, model.alignment
    else:
        learn_cfg = align_cfg = model
    learn_test, learn_train = _descriptors(test, learn_cfg), _descriptors(train, learn_cfg)
    if align_cfg == learn_cfg:
        align_test, align_train = learn_test, learn_train
    else:
        align_test, align_train = _descriptors(test, align_cfg), _descriptors(train, align_cfg)
    paths = path_table(align_test, align_train)
    if isinstance(model, MetricModel):
        cb = model.codebook
        a_test = [cb.assign_all(d) for d in learn_test]
        a_train = [cb.assign_all(d) for d in learn_train]
        return feature_table(paths, learn_test, learn_train, a_test, a_train, cb.k) @ model.omega
    zeros_test = [np.zeros(d.shape[0], dtype=np.int64) for d in learn_test]
    zeros_train = [np.zeros(d.shape[0], dtype=np.int64) for d in learn_train]
    return feature_table(paths, learn_test, learn_train, zeros_test, zeros_train, 1)[..., 0]


def predict_from_distances(dists, test, train):
    dists = np.atleast_2d(dists)
    nearest = np.argmin(dists, axis=1)
    return [
        Prediction(
            test_id=t.id,
            predicted_label=int(train[nn].label),
            nearest_train_id=train[nn].id,
            distance=float(dists[row, nn]),
            true_label=int(t.label),
        )
        for row, (t, nn) in enumerate(zip(test, nearest))
    ]


def classify(test, train, model: "MetricModel | DescriptorConfig | None" = None):
    """Predict each test sequence's label from its nearest training sequence.

    Distance ties resolve to the lower training index.
    """
    test, train = list(test), list(train)
    if not train:
        raise ValueError("training set is empty")
    if not test:
        return []
    return predict_from_distances(distance_table(test, train, model), test, train)


def error_rate(preds, truth):
    """Fraction of predictions disagreeing with ``truth``.

    ``truth`` is either a ``{test_id: label}`` mapping or a sequence of labels
    aligned with ``preds``.
    """
    preds = list(preds)
    if not preds:
        raise ValueError("no predictions")
    if isinstance(truth, dict):
        ids = [p.test_id for p in preds]
        if set(ids) != set(truth):
            raise ValueError("prediction ids do not match the ground-truth ids")
        labels = [truth[i] for i in ids]
    else:
        labels = list(truth)
        if len(labels) != len(preds):
            raise ValueError(f"{len(preds)} predictions but {len(labels)} labels")
    wrong = sum(int(p.predicted_label != y) for p, y in zip(preds, labels))
    return wrong / len(preds)


def write_predictions(preds, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["test_id", "true", "pred", "nn_id", "distance"])
    for p in preds:
        writer.writerow([p.test_id, p.true_label, p.predicted_label, p.nearest_train_id,
                         repr(p.distance)])
