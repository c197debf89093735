"""CrossConv: drop every event on a pixel that out-fires its plus-shaped neighbourhood."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..evstream import EventStream, window_slices

# one-pixel shifts (down, left, right, up) as 3x3 kernels
KERNELS = np.array([
    [[0, 0, 0], [0, 0, 0], [0, 1, 0]],
    [[0, 0, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 0, 0]],
    [[0, 1, 0], [0, 0, 0], [0, 0, 0]],
], dtype=np.float64)


def count_image(stream: EventStream) -> np.ndarray:
    flat = stream.y.astype(np.int64) * stream.width + stream.x
    return np.bincount(flat, minlength=stream.width * stream.height).reshape(
        stream.height, stream.width).astype(np.float64)


def neighbour_max(h: np.ndarray) -> np.ndarray:
    """Pixel-wise max over the four kernel responses (zero padding at the border)."""
    pad = np.pad(h, 1)
    H, W = h.shape
    out = np.zeros_like(h)
    for k in KERNELS:
        dy, dx = np.argwhere(k)[0]
        np.maximum(out, pad[dy:dy + H, dx:dx + W], out=out)
    return out


def noise_map(h: np.ndarray) -> np.ndarray:
    """H / H_max; +inf where a pixel fired with silent neighbours, 0 where it never fired."""
    hmax = neighbour_max(h)
    nmap = np.zeros_like(h)
    pos = h > 0
    lonely = pos & (hmax == 0)
    nmap[lonely] = np.inf
    shared = pos & ~lonely
    nmap[shared] = h[shared] / hmax[shared]
    return nmap


def _crossconv_batch(stream: EventStream, threshold: float) -> np.ndarray:
    if len(stream) == 0:
        return np.zeros(0, dtype=bool)
    noisy = noise_map(count_image(stream)) > threshold
    return ~noisy[stream.y, stream.x]


def crossconv(stream: EventStream, threshold: float = 2.0, window: Optional[float] = None) -> np.ndarray:
    """Keep mask; ``window`` (us) splits the stream into independent batches,
    None treats the whole stream as one batch."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if window is None:
        return _crossconv_batch(stream, threshold)
    keep = np.zeros(len(stream), dtype=bool)
    for sl in window_slices(stream, int(window)):
        keep[sl] = _crossconv_batch(stream.take(sl), threshold)
    return keep
