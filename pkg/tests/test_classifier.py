import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtwmetric.classifier import (
    Prediction,
    classify,
    distance_table,
    error_rate,
    write_predictions,
)
from dtwmetric.clustering import fit_kmeans
from dtwmetric.dataset import dataset_from_arrays
from dtwmetric.descriptors import DescriptorConfig, extract_all
from dtwmetric.dtw import align
from dtwmetric.learner import MetricModel

from conftest import toy_series


@pytest.fixture
def hand_instance():
    train = [[0, 0, 0], [1, 1, 1], [0, 1, 2]]
    test = [[0, 0, 1], [1, 1, 2]]
    return dataset_from_arrays(train, [0, 1, 0], test, [0, 1])


def test_hand_computed_distance_table(hand_instance):
    d = hand_instance
    # t0=[0,0,1]: vs A forced (2,2) cost 1; vs B two unit costs; vs C the path
    # (0,0),(1,0),(2,1),(2,2) costs 0+0+0+1.
    # t1=[1,1,2]: vs A at least 1+1+4; vs B and C the diagonal costs 1.
    D = distance_table(d.test, d.train, None)
    np.testing.assert_array_equal(D, [[1.0, 2.0, 1.0], [6.0, 1.0, 1.0]])
    preds = classify(d.test, d.train)
    assert [p.nearest_train_id for p in preds] == ["train_0", "train_1"]
    assert [p.predicted_label for p in preds] == [0, 1]
    assert error_rate(preds, d.test_labels()) == 0.0


def test_identical_sequence_is_nearest():
    values, labels = toy_series(4, seed=0)
    d = dataset_from_arrays(values, labels, [values[5]], [labels[5]])
    for model in (None, DescriptorConfig(kind="derivative", window_length=7)):
        (p,) = classify(d.test, d.train, model)
        assert p.nearest_train_id == "train_5"
        assert p.distance == 0.0


def _model(d, cfg, omega=None, k=3):
    cb = fit_kmeans(np.vstack([extract_all(s.values, cfg) for s in d.train]), k)
    return MetricModel(cb, np.ones(cb.n_pairs) if omega is None else omega, 0.5, cfg)


def test_unit_weights_match_unit_metric(toy_dataset):
    cfg = DescriptorConfig(kind="hog1d", window_length=10)
    model = _model(toy_dataset, cfg)
    learned = distance_table(toy_dataset.test, toy_dataset.train, model)
    unit = distance_table(toy_dataset.test, toy_dataset.train, cfg)
    np.testing.assert_allclose(learned, unit, rtol=1e-12)
    a = classify(toy_dataset.test, toy_dataset.train, model)
    b = classify(toy_dataset.test, toy_dataset.train, cfg)
    assert [p.nearest_train_id for p in a] == [p.nearest_train_id for p in b]


def test_unit_model_equals_direct_align(toy_dataset):
    cfg = DescriptorConfig(kind="raw", window_length=5)
    table = distance_table(toy_dataset.test, toy_dataset.train, cfg)
    for r, t in enumerate(toy_dataset.test):
        for c, s in enumerate(toy_dataset.train):
            assert table[r, c] == pytest.approx(
                align(extract_all(t.values, cfg), extract_all(s.values, cfg)).distance,
                rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_argmin_invariant_under_weight_scaling(seed, s):
    values, labels = toy_series(3, seed=seed)
    d = dataset_from_arrays(values[:4], labels[:4], values[4:], labels[4:])
    cfg = DescriptorConfig(kind="derivative", window_length=6)
    omega = np.random.default_rng(seed).exponential(size=6)
    base = classify(d.test, d.train, _model(d, cfg, omega))
    scaled = classify(d.test, d.train, _model(d, cfg, omega * s))
    assert [p.predicted_label for p in base] == [p.predicted_label for p in scaled]


def _preds(labels):
    return [Prediction(f"t{i}", y, "x", 0.0) for i, y in enumerate(labels)]


def test_error_rate_examples():
    assert error_rate(_preds([0, 1, 1]), [0, 1, 1]) == 0.0
    assert error_rate(_preds([1, 0]), [0, 1]) == 1.0
    assert error_rate(_preds([0, 1, 1, 0]), [0, 1, 1, 1]) == 0.25
    assert error_rate(_preds([0, 1]), {"t1": 1, "t0": 1}) == 0.5


def test_error_rate_mismatch():
    with pytest.raises(ValueError):
        error_rate(_preds([0, 1]), {"t0": 0, "other": 1})
    with pytest.raises(ValueError):
        error_rate(_preds([0, 1]), [0])
    with pytest.raises(ValueError):
        error_rate([], [])


def test_classify_edge_cases(hand_instance):
    assert classify([], hand_instance.train) == []
    with pytest.raises(ValueError):
        classify(hand_instance.test, [])


def test_write_predictions(hand_instance):
    buf = io.StringIO()
    write_predictions(classify(hand_instance.test, hand_instance.train), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "test_id,true,pred,nn_id,distance"
    assert lines[1] == "test_0,0,0,train_0,1.0"
