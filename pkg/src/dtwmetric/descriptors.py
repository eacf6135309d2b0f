"""Per-point shape descriptors.

Each temporal point is represented by the subsequence centered on it,
either as is (``raw``), as its derivative estimate (``derivative``) or as a
histogram of oriented gradients over a few contiguous blocks (``hog1d``).
All extractors return a ``(length, dim)`` float array.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

KINDS = ("raw", "derivative", "hog1d")


@dataclass(frozen=True)
class DescriptorConfig:
    kind: str = "hog1d"
    window_length: int = 30
    hog_intervals: int = 2
    hog_bins: int = 8
    hog_sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown descriptor kind {self.kind!r}; expected one of {KINDS}")
        if self.window_length < 3:
            raise ValueError("window_length must be >= 3")
        if self.hog_intervals < 1 or self.hog_bins < 1:
            raise ValueError("hog_intervals and hog_bins must be positive")
        if self.hog_sigma <= 0:
            raise ValueError("hog_sigma must be positive")
        if self.kind == "hog1d" and self.window_length < 2 * self.hog_intervals:
            raise ValueError("window_length must be >= 2 * hog_intervals for hog1d")

    @property
    def dim(self):
        if self.kind == "hog1d":
            return self.hog_intervals * self.hog_bins
        return self.window_length

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _window_indices(n, centers, window_length):
    left = (window_length - 1) // 2
    offsets = np.arange(window_length) - left
    return np.clip(np.asarray(centers)[..., None] + offsets, 0, n - 1)


def extract_window(s, center, window_length):
    """Subsequence of ``window_length`` samples centered at ``center``.

    For even lengths the window holds one fewer sample on the left.
    Positions outside the sequence repeat the nearest endpoint.
    """
    values = np.asarray(getattr(s, "values", s), dtype=float)
    n = values.size
    if not 0 <= center < n:
        raise IndexError(f"center {center} out of range for length {n}")
    return values[_window_indices(n, center, window_length)]


def derivative_descriptor(window):
    """Keogh-Pazzani derivative estimate of a window (or a stack of windows).

    Interior points use ``((q[i] - q[i-1]) + (q[i+1] - q[i-1]) / 2) / 2``;
    the first and last points copy their interior neighbour.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[-1] < 3:
        raise ValueError("derivative needs a window of length >= 3")
    inner = ((w[..., 1:-1] - w[..., :-2]) + (w[..., 2:] - w[..., :-2]) / 2.0) / 2.0
    return np.concatenate([inner[..., :1], inner, inner[..., -1:]], axis=-1)


def _block_bounds(length, intervals):
    size = length // intervals
    starts = [b * size for b in range(intervals)]
    ends = starts[1:] + [length]
    return list(zip(starts, ends))


def hog1d_descriptor(window, cfg: DescriptorConfig = DescriptorConfig()):
    """HOG-1D histogram of a window (or of a ``(..., w)`` stack of windows).

    The window is cut into ``hog_intervals`` equal blocks (the last block
    absorbs the remainder). Inside a block, gradients ``g`` come from
    ``np.gradient`` and vote with weight ``sqrt(1 + (g/sigma)^2)`` for the
    orientation ``arctan(g/sigma)``, linearly shared between the two nearest
    of ``hog_bins`` bin centers over ``[-pi/2, pi/2]`` (clamped at the ends,
    no wrap-around). Each block histogram is L2-normalized.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[-1] < 2 * cfg.hog_intervals:
        raise ValueError(
            f"window of length {w.shape[-1]} too short for {cfg.hog_intervals} intervals"
        )
    lead = w.shape[:-1]
    nbins = cfg.hog_bins
    width = np.pi / nbins
    blocks = []
    for start, end in _block_bounds(w.shape[-1], cfg.hog_intervals):
        g = np.gradient(w[..., start:end], axis=-1) / cfg.hog_sigma
        theta = np.arctan(g)
        weight = np.sqrt(1.0 + g * g)
        # continuous bin coordinate: bin b has its center at position b
        pos = np.clip((theta + np.pi / 2) / width - 0.5, 0.0, nbins - 1.0)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, nbins - 1)
        frac = pos - lo
        hist = np.zeros(lead + (nbins,))
        flat = hist.reshape(-1, nbins)
        rows = np.broadcast_to(
            np.arange(flat.shape[0]).reshape(lead + (1,)), lo.shape
        ).ravel()
        np.add.at(flat, (rows, lo.ravel()), (weight * (1.0 - frac)).ravel())
        np.add.at(flat, (rows, hi.ravel()), (weight * frac).ravel())
        norm = np.linalg.norm(hist, axis=-1, keepdims=True)
        hist = np.divide(hist, norm, out=np.zeros_like(hist), where=norm > 0)
        blocks.append(hist)
    return np.concatenate(blocks, axis=-1)


def extract_all(s, cfg: DescriptorConfig = DescriptorConfig()):
    """Descriptor of every point of ``s`` as a ``(len(s), cfg.dim)`` array."""
    values = np.asarray(getattr(s, "values", s), dtype=float)
    n = values.size
    windows = values[_window_indices(n, np.arange(n), cfg.window_length)]
    if cfg.kind == "raw":
        return windows
    if cfg.kind == "derivative":
        return derivative_descriptor(windows)
    return hog1d_descriptor(windows, cfg)


def point_series(s):
    """Single-point "descriptor": the sample values as a ``(n, 1)`` array."""
    return np.asarray(getattr(s, "values", s), dtype=float).reshape(-1, 1)
