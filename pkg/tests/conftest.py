from pathlib import Path

import numpy as np
import pytest

from dtwmetric.dataset import dataset_from_arrays

DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "ucr"


@pytest.fixture(scope="session")
def ucr_dir():
    if not DATA_DIR.is_dir():
        pytest.skip("UCR data not fetched; run scripts/fetch_ucr.py")
    return DATA_DIR


def toy_series(n_per_class=6, length=40, seed=0):
    """Two easy classes: noisy sine bumps versus noisy square pulses."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, length)
    values, labels = [], []
    for i in range(2 * n_per_class):
        y = i % 2
        shift = rng.uniform(-0.1, 0.1)
        if y == 0:
            s = np.sin(2 * np.pi * (t + shift))
        else:
            s = np.where(np.abs(t - 0.5 - shift) < 0.2, 1.0, -1.0)
        values.append(s + 0.1 * rng.standard_normal(length))
        labels.append(y)
    return values, labels


@pytest.fixture
def toy_dataset():
    tr_v, tr_y = toy_series(6, seed=1)
    te_v, te_y = toy_series(3, seed=2)
    return dataset_from_arrays(tr_v, tr_y, te_v, te_y, name="toy")
