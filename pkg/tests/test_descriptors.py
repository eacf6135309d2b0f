import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dtwmetric.descriptors import (
    KINDS,
    DescriptorConfig,
    derivative_descriptor,
    extract_all,
    extract_window,
    hog1d_descriptor,
)


@pytest.mark.parametrize(
    "s, center, w, expected",
    [
        ([1, 2, 3, 4, 5], 2, 3, [2, 3, 4]),
        ([1, 2, 3], 0, 3, [1, 1, 2]),
        (list(range(10)), 9, 5, [7, 8, 9, 9, 9]),
        (list(range(10)), 0, 4, [0, 0, 1, 2]),
    ],
)
def test_extract_window(s, center, w, expected):
    np.testing.assert_array_equal(extract_window(np.array(s, float), center, w), expected)


def test_extract_window_out_of_range():
    with pytest.raises(IndexError):
        extract_window(np.arange(5.0), 5, 3)


def test_derivative_examples():
    np.testing.assert_array_equal(derivative_descriptor(np.full(6, 3.5)), np.zeros(6))
    np.testing.assert_array_equal(derivative_descriptor([0, 1, 2, 3]), [1, 1, 1, 1])
    # position 1: ((1-0) + (0-0)/2)/2, position 2: ((0-1) + (1-1)/2)/2, ...
    np.testing.assert_array_equal(
        derivative_descriptor([0, 1, 0, 1, 0]), [0.5, 0.5, -0.5, 0.5, 0.5]
    )
    with pytest.raises(ValueError):
        derivative_descriptor([1.0, 2.0])


def test_hog_constant_window():
    h = hog1d_descriptor(np.full(30, 2.0))
    assert h.shape == (16,)
    block = np.zeros(8)
    block[3] = block[4] = 1 / np.sqrt(2)
    np.testing.assert_allclose(h, np.concatenate([block, block]))


def test_hog_steep_ramp_fills_top_bin():
    theta = np.arctan(10 / 0.1)
    assert theta > np.pi / 2 - np.pi / 16  # beyond the top bin centre
    h = hog1d_descriptor(np.arange(30) * 10.0)
    block = np.zeros(8)
    block[7] = 1.0
    np.testing.assert_allclose(h, np.concatenate([block, block]))


def test_hog_dimension_and_short_window():
    cfg = DescriptorConfig(kind="hog1d", window_length=10, hog_intervals=1, hog_bins=4)
    assert hog1d_descriptor(np.random.default_rng(0).random(10), cfg).shape == (4,)
    with pytest.raises(ValueError):
        hog1d_descriptor(np.arange(3.0))


def test_hog_remainder_goes_to_last_block():
    cfg = DescriptorConfig(window_length=7, hog_intervals=2, hog_bins=8)
    # first block [0,1,2] is flat, last block [3..6] carries the ramp
    w = np.array([0, 0, 0, 5, 10, 15, 20], float)
    h = hog1d_descriptor(w, cfg)
    assert h[:8].argmax() in (3, 4)
    assert h[8:].argmax() == 7


def test_extract_all_examples():
    cfg = DescriptorConfig(kind="raw", window_length=3)
    np.testing.assert_array_equal(
        extract_all(np.array([1.0, 2, 3]), cfg), [[1, 1, 2], [1, 2, 3], [2, 3, 3]]
    )
    d = extract_all(np.full(12, 4.0), DescriptorConfig(kind="derivative", window_length=5))
    np.testing.assert_array_equal(d, np.zeros((12, 5)))
    h = extract_all(np.random.default_rng(0).standard_normal(100))
    assert h.shape == (100, 16)


def test_config_validation():
    with pytest.raises(ValueError):
        DescriptorConfig(kind="wavelet")
    with pytest.raises(ValueError):
        DescriptorConfig(window_length=2)
    with pytest.raises(ValueError):
        DescriptorConfig(kind="hog1d", window_length=5, hog_intervals=3)
    cfg = DescriptorConfig(kind="raw", window_length=11)
    assert DescriptorConfig.from_dict(cfg.to_dict()) == cfg


def test_vectorized_matches_single_window():
    rng = np.random.default_rng(3)
    s = rng.standard_normal(40)
    for kind in KINDS:
        cfg = DescriptorConfig(kind=kind, window_length=9)
        full = extract_all(s, cfg)
        for i in (0, 7, 39):
            w = extract_window(s, i, 9)
            single = {"raw": w, "derivative": derivative_descriptor(w)}.get(kind)
            if single is None:
                single = hog1d_descriptor(w, cfg)
            np.testing.assert_allclose(full[i], single, rtol=0, atol=1e-12)


configs = st.builds(
    DescriptorConfig,
    kind=st.sampled_from(KINDS),
    window_length=st.integers(6, 40),
    hog_intervals=st.integers(1, 3),
    hog_bins=st.integers(1, 10),
    hog_sigma=st.floats(0.01, 2.0),
)
series = arrays(np.float64, st.integers(2, 60), elements=st.floats(-100, 100))


@settings(max_examples=80, deadline=None)
@given(configs, series)
def test_dimension_law(cfg, s):
    out = extract_all(s, cfg)
    assert out.shape == (s.size, cfg.dim)
    assert np.all(np.isfinite(out))


@settings(max_examples=60, deadline=None)
@given(configs, series, st.floats(-50, 50))
def test_translation_laws(cfg, s, c):
    base = extract_all(s, cfg)
    shifted = extract_all(s + c, cfg)
    if cfg.kind == "raw":
        np.testing.assert_array_equal(shifted, base + c)
    else:
        # adding c changes float rounding of the differences only
        np.testing.assert_allclose(shifted, base, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(configs.filter(lambda c: c.kind == "hog1d"), series)
def test_hog_blocks_nonnegative_unit_or_zero(cfg, s):
    h = extract_all(s, cfg).reshape(s.size, cfg.hog_intervals, cfg.hog_bins)
    assert np.all(h >= 0)
    norms = np.linalg.norm(h, axis=-1)
    assert np.all(np.isclose(norms, 1.0) | (norms == 0))
