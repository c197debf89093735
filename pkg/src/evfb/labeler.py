"""Ground-truth labeling: stars, then satellites, then hot pixels, then noise."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .cmax import Iwe, warp
from .evstream import EventStream, Label

log = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Cluster:
    center: tuple          # (x, y), count-weighted
    pixel_count: int
    pixels: frozenset      # {(x, y), ...}
    total: float = 0.0

    @property
    def bbox(self):
        xs = [p[0] for p in self.pixels]
        ys = [p[1] for p in self.pixels]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class CircleLabel:
    x: float
    y: float
    r: float
    label: int

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("circle radius must be positive")
        if self.label not in (0, 1, 2, 3):
            raise ValueError("circle label must be in 0..3")

    def to_dict(self):
        return {"x": self.x, "y": self.y, "r": self.r, "label": self.label}


def load_circles(path) -> list[CircleLabel]:
    data = json.loads(Path(path).read_text())
    return [CircleLabel(float(c["x"]), float(c["y"]), float(c["r"]), int(c["label"])) for c in data]


def save_circles(circles: Sequence[CircleLabel], path) -> None:
    Path(path).write_text(json.dumps([c.to_dict() for c in circles], indent=1))


def star_radius(magnitude: float, m_max: float, r0: float = 2.0, r1: float = 1.5) -> float:
    """Circle radius growing with brightness: r0 + r1 * (m_max - m), clipped to [2, 12] px."""
    return float(np.clip(r0 + r1 * (m_max - magnitude), 2.0, 12.0))


def connected_components(iwe, k: float = 10.0) -> list[Cluster]:
    """8-connected clusters of pixels at or above the rho-quantile of nonzero counts.

    rho = 1 - k/100, so k=10 keeps roughly the brightest 10% of active pixels.
    """
    if not 0 <= k <= 100:
        raise ValueError("k must be in [0, 100]")
    img = iwe.counts if isinstance(iwe, Iwe) else np.asarray(iwe, dtype=np.float64)
    active = img[img > 0]
    if active.size == 0:
        return []
    thr = np.quantile(active, 1.0 - k / 100.0)
    binary = (img >= thr) & (img > 0)
    lab, n = ndimage.label(binary, structure=EIGHT_CONNECTED)
    out = []
    for i, sl in enumerate(ndimage.find_objects(lab), start=1):
        sub = lab[sl] == i
        ys, xs = np.nonzero(sub)
        ys = ys + sl[0].start
        xs = xs + sl[1].start
        w = img[ys, xs]
        tot = float(w.sum())
        center = (float((xs * w).sum() / tot), float((ys * w).sum() / tot))
        out.append(Cluster(center, int(xs.size), frozenset(zip(xs.tolist(), ys.tolist())), tot))
    return out


def circles_from_clusters(clusters: Sequence[Cluster], label: int = int(Label.STAR),
                          radius: Optional[float] = None, margin: float = 1.5) -> list[CircleLabel]:
    """One circle per cluster; radius defaults to the cluster's equivalent radius plus a margin."""
    out = []
    for c in clusters:
        r = radius if radius is not None else float(np.sqrt(c.pixel_count / np.pi) + margin)
        out.append(CircleLabel(c.center[0], c.center[1], r, label))
    return out


def circle_assignment(stream: EventStream, circles: Sequence[CircleLabel], theta,
                      t_ref: Optional[int] = None) -> np.ndarray:
    """Index of the first circle containing each warped event, or -1."""
    n = len(stream)
    hit = np.full(n, -1, dtype=np.int64)
    if n == 0 or not circles:
        return hit
    pos = warp(stream, theta, t_ref)
    for i, c in enumerate(circles):
        free = hit < 0
        d2 = (pos[free, 0] - c.x) ** 2 + (pos[free, 1] - c.y) ** 2
        inside = d2 <= c.r * c.r
        idx = np.flatnonzero(free)[inside]
        hit[idx] = i
    return hit


def label_by_circles(stream: EventStream, circles: Sequence[CircleLabel], theta,
                     t_ref: Optional[int] = None) -> tuple[EventStream, EventStream]:
    """Split into (events captured by a circle, labeled with its label; the rest)."""
    hit = circle_assignment(stream, circles, theta, t_ref)
    cap = hit >= 0
    labels = np.array([c.label for c in circles], dtype=np.uint8)[hit[cap]] if circles else np.zeros(0, np.uint8)
    captured = stream.take(cap).without_labels().with_labels(labels)
    return captured, stream.take(~cap)


def hot_pixel_mask(stream: EventStream, percentile: float = 98.0) -> np.ndarray:
    """Events on pixels whose count is strictly above the percentile of active-pixel counts."""
    if not 0 < percentile < 100:
        raise ValueError("percentile must be in (0, 100)")
    n = len(stream)
    if n == 0:
        return np.zeros(0, dtype=bool)
    flat = stream.y.astype(np.int64) * stream.width + stream.x
    counts = np.bincount(flat, minlength=stream.width * stream.height)
    thr = np.percentile(counts[counts > 0], percentile)
    return counts[flat] > thr


def label_hot_pixels(stream: EventStream, percentile: float = 98.0) -> tuple[EventStream, EventStream]:
    """Returns (hot-pixel events labeled 2, remaining events labeled 0)."""
    hot = hot_pixel_mask(stream, percentile)
    a = stream.take(hot).without_labels()
    b = stream.take(~hot).without_labels()
    return (a.with_labels(np.full(len(a), int(Label.HOT_PIXEL), np.uint8)),
            b.with_labels(np.zeros(len(b), np.uint8)))


def run_labeling(stream: EventStream, star_circles: Sequence[CircleLabel],
                 satellite_circles: Sequence[CircleLabel], theta_field, theta_sat,
                 percentile: float = 98.0) -> EventStream:
    """Label every event once: star circles (under the field velocity), satellite
    circles (under the satellite velocity) on what is left, hot pixels on the
    remainder, and noise for everything else."""
    n = len(stream)
    out = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return stream.without_labels().with_labels(out)
    t_ref = int(stream.t[0])
    remaining = np.ones(n, dtype=bool)

    star_hit = circle_assignment(stream, star_circles, theta_field, t_ref)
    stars = star_hit >= 0
    if star_circles:
        out[stars] = np.array([c.label for c in star_circles], np.uint8)[star_hit[stars]]
    remaining &= ~stars

    if satellite_circles:
        sat_all = circle_assignment(stream, satellite_circles, theta_sat, t_ref)
        conflict = int(np.count_nonzero(stars & (sat_all >= 0)))
        if conflict:
            log.warning("%d events fall in both star and satellite circles; keeping star labels", conflict)
        sat = remaining & (sat_all >= 0)
        out[sat] = np.array([c.label for c in satellite_circles], np.uint8)[sat_all[sat]]
        remaining &= ~sat

    idx = np.flatnonzero(remaining)
    if idx.size:
        hot = hot_pixel_mask(stream.take(idx), percentile)
        out[idx[hot]] = int(Label.HOT_PIXEL)
        out[idx[~hot]] = int(Label.NOISE)
    return stream.without_labels().with_labels(out)
