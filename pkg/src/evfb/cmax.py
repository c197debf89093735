"""Contrast maximization: warp events by a candidate velocity, accumulate an
image of warped events (IWE) and score it by its variance."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .evstream import US, EventStream


class Velocity(NamedTuple):
    vx: float
    vy: float


@dataclass
class Iwe:
    counts: np.ndarray  # (height, width) float64
    dropped: int = 0

    @property
    def width(self) -> int:
        return self.counts.shape[1]

    @property
    def height(self) -> int:
        return self.counts.shape[0]

    def to_pgm(self, path) -> None:
        """Write an 8-bit binary PGM, linearly scaled to the maximum count."""
        c = self.counts
        peak = c.max() if c.size else 0
        img = np.zeros(c.shape, np.uint8) if peak <= 0 else np.rint(255 * c / peak).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.width} {self.height}\n255\n".encode())
            fh.write(img.tobytes())


@dataclass
class SearchConfig:
    range: float = 10.0      # half-width of the coarse grid around init, px/s
    step: float = 2.0        # coarse grid spacing, px/s
    levels: int = 3          # refinement levels
    factor: int = 4          # step shrink per level
    bilinear: bool = True
    jobs: int = 1


def warp(stream: EventStream, theta, t_ref: Optional[int] = None) -> np.ndarray:
    """Positions u' = u - theta * (t - t_ref), as an (n, 2) float array of (x', y')."""
    if t_ref is None:
        t_ref = int(stream.t[0]) if len(stream) else 0
    dt = (stream.t - t_ref).astype(np.float64) / US
    out = np.empty((len(stream), 2))
    out[:, 0] = stream.x - theta[0] * dt
    out[:, 1] = stream.y - theta[1] * dt
    return out


def accumulate_iwe(positions: np.ndarray, width: int, height: int, bilinear: bool = True,
                   weights: Optional[np.ndarray] = None) -> Iwe:
    """Sum unit weights at warped positions; out-of-bounds mass is dropped and counted."""
    if width <= 0 or height <= 0:
        raise ValueError("geometry must be positive")
    n = len(positions)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if n == 0:
        return Iwe(np.zeros((height, width)))
    px, py = positions[:, 0], positions[:, 1]
    if not bilinear:
        xi = np.floor(px + 0.5).astype(np.int64)
        yi = np.floor(py + 0.5).astype(np.int64)
        ok = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        img = np.bincount(yi[ok] * width + xi[ok], weights=w[ok], minlength=width * height)
        return Iwe(img.reshape(height, width), int(n - ok.sum()))
    # bilinear: only positions whose whole 2x2 footprint is on the sensor
    inside = (px >= 0) & (px <= width - 1) & (py >= 0) & (py <= height - 1)
    px, py, w = px[inside], py[inside], w[inside]
    x0 = np.minimum(np.floor(px).astype(np.int64), width - 2 if width > 1 else 0)
    y0 = np.minimum(np.floor(py).astype(np.int64), height - 2 if height > 1 else 0)
    fx = px - x0
    fy = py - y0
    img = np.zeros(width * height)
    for dx, dy, wk in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                       (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi, yi = x0 + dx, y0 + dy
        ok = (xi < width) & (yi < height)
        img += np.bincount(yi[ok] * width + xi[ok], weights=(w * wk)[ok], minlength=width * height)
    return Iwe(img.reshape(height, width), int(n - inside.sum()))


def contrast(iwe) -> float:
    """Population variance of the IWE pixel values."""
    c = iwe.counts if isinstance(iwe, Iwe) else np.asarray(iwe)
    if c.size == 0:
        raise ValueError("empty image")
    return float(np.var(c))


def make_iwe(stream: EventStream, theta, bilinear: bool = True, t_ref=None) -> Iwe:
    return accumulate_iwe(warp(stream, theta, t_ref), stream.width, stream.height, bilinear)


def contrast_at(stream: EventStream, theta, bilinear: bool = True, t_ref=None) -> float:
    return contrast(make_iwe(stream, theta, bilinear, t_ref))


def landscape(stream: EventStream, vxs, vys, bilinear: bool = True, jobs: int = 1) -> np.ndarray:
    """Contrast over a velocity grid; result[j, i] is at (vxs[i], vys[j])."""
    grid = list(itertools.product(vys, vxs))
    fn = lambda v: contrast_at(stream, (v[1], v[0]), bilinear)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            vals = list(ex.map(fn, grid))
    else:
        vals = [fn(v) for v in grid]
    return np.array(vals).reshape(len(vys), len(vxs))


def _best(cands, values, prefer):
    top = max(values)
    tied = [c for c, v in zip(cands, values) if v == top]
    if prefer in tied:
        return prefer, top
    return min(tied), top


def estimate_velocity(stream: EventStream, search: Optional[SearchConfig] = None,
                      init=(0.0, 0.0)) -> tuple[Velocity, float]:
    """Coarse grid around ``init`` then local refinement; returns (theta*, contrast).

    Exact ties keep the incumbent, otherwise the lexicographically lowest
    (vx, vy) wins.
    """
    if len(stream) == 0:
        raise ValueError("cannot estimate velocity from an empty event set")
    s = search or SearchConfig()
    t_ref = int(stream.t[0])
    cache = {}

    def evaluate(cands):
        todo = [c for c in cands if c not in cache]
        fn = lambda v: contrast_at(stream, v, s.bilinear, t_ref)
        if s.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(s.jobs) as ex:
                vals = list(ex.map(fn, todo))
        else:
            vals = [fn(c) for c in todo]
        cache.update(zip(todo, vals))
        return [cache[c] for c in cands]

    init = (float(init[0]), float(init[1]))
    n = int(round(s.range / s.step))
    offs = [k * s.step for k in range(-n, n + 1)]
    cands = [(init[0] + a, init[1] + b) for a in offs for b in offs]
    best, val = _best(cands, evaluate(cands), init)
    step = s.step
    for _ in range(s.levels):
        prev = step
        step = step / s.factor
        m = int(round(prev / step))
        offs = [k * step for k in range(-m, m + 1)]
        cands = [(best[0] + a, best[1] + b) for a in offs for b in offs]
        best, val = _best(cands, evaluate(cands), best)
    return Velocity(*best), val
