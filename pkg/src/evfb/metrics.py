"""Scoring against ground truth: SR / NR / HPR / DA, ROC sweeps with AUC, and
the window-size experiment.

Signal is satellite events (label 1); the negative class is background noise
(0) plus hot pixels (2).  Star events (3) are left out of every rate.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .evstream import EventStream, Label, slice_windows

log = logging.getLogger(__name__)

NAN = float("nan")


@dataclass
class Confusion:
    kept: np.ndarray      # per label 0..3
    dropped: np.ndarray

    @property
    def total(self) -> int:
        return int(self.kept.sum() + self.dropped.sum())

    def count(self, label: int) -> int:
        return int(self.kept[label] + self.dropped[label])


@dataclass
class Scores:
    confusion: Confusion
    tpr: float
    fpr: float
    sr: float
    nr: float
    hpr: float
    da: float
    # True when DA had to skip an undefined component
    da_partial: bool = False

    def as_dict(self) -> dict:
        return {"TPR": self.tpr, "FPR": self.fpr, "SR": self.sr, "NR": self.nr,
                "HPR": self.hpr, "DA": self.da}


def _ratio(num: int, den: int) -> float:
    return num / den if den else NAN


def denoise_accuracy(sr: float, nr: float, hpr: float) -> float:
    return (sr + nr + hpr) / 3


def confusion(mask, labels) -> Confusion:
    mask = np.asarray(mask, dtype=bool)
    labels = np.asarray(labels)
    if mask.shape != labels.shape:
        raise ValueError(f"mask has {mask.size} entries but truth has {labels.size}")
    kept = np.bincount(labels[mask], minlength=4)[:4]
    dropped = np.bincount(labels[~mask], minlength=4)[:4]
    return Confusion(kept.astype(np.int64), dropped.astype(np.int64))


def score(mask, truth) -> Scores:
    """Rates for one keep mask against a labeled stream (or a label array)."""
    labels = truth.label if isinstance(truth, EventStream) else truth
    if labels is None:
        raise ValueError("truth stream carries no labels")
    c = confusion(mask, labels)
    k, d = c.kept, c.dropped
    tpr = _ratio(k[1], k[1] + d[1])
    fpr = _ratio(k[0] + k[2], k[0] + d[0] + k[2] + d[2])
    sr = 100 * tpr
    nr = 100 * _ratio(d[0], k[0] + d[0])
    hpr = 100 * _ratio(d[2], k[2] + d[2])
    parts = [v for v in (sr, nr, hpr) if not math.isnan(v)]
    if len(parts) == 3:
        da, partial = denoise_accuracy(sr, nr, hpr), False
    else:
        da, partial = (sum(parts) / len(parts) if parts else NAN), True
    return Scores(c, tpr, fpr, sr, nr, hpr, da, partial)


def _nanmean(vals) -> float:
    vals = [v for v in vals if not math.isnan(v)]
    return float(sum(vals) / len(vals)) if vals else NAN


# ------------------------------------------------------------------- ROC

@dataclass
class RocPoint:
    param: float
    fpr: float
    tpr: float
    sr: float = NAN
    nr: float = NAN
    hpr: float = NAN
    da: float = NAN


@dataclass
class RocReport:
    name: str
    param: str
    points: list          # RocPoint, ordered by parameter
    auc: float
    best: Optional[RocPoint]
    failed: list = field(default_factory=list)

    def to_dict(self) -> dict:
        pts = [vars(p) for p in self.points]
        best = vars(self.best) if self.best else None
        return {"algo": self.name, "param": self.param, "auc": self.auc, "best": best,
                "points": pts, "failed": self.failed}


def auc(fpr, tpr) -> float:
    """Trapezoid area under (FPR, TPR) points with (0,0) and (1,1) appended."""
    pts = sorted(zip([0.0, *map(float, fpr), 1.0], [0.0, *map(float, tpr), 1.0]))
    a = 0.0
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        a += (x1 - x0) * (y0 + y1) / 2
    return a


def best_point(points: Sequence[RocPoint]) -> Optional[RocPoint]:
    """Youden's J (TPR - FPR); ties go to the lower FPR, then the earlier point."""
    ok = [p for p in points if not (math.isnan(p.fpr) or math.isnan(p.tpr))]
    if not ok:
        return None
    return min(ok, key=lambda p: (-(p.tpr - p.fpr), p.fpr))


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def roc_sweep(masker: Callable, values: Sequence[float], dataset: Sequence[EventStream],
              name: str = "", param: str = "", jobs: int = 1) -> RocReport:
    """Run ``masker(stream, value) -> mask`` at every value over every stream.

    TPR/FPR and the SR/NR/HPR/DA scores are macro-averaged over streams.
    """
    if len(values) < 2:
        raise ValueError("a sweep needs at least two values")
    values = sorted(values)

    def at(v):
        try:
            per = [score(masker(s, v), s) for s in dataset]
        except Exception as exc:  # noqa: BLE001 - a failing sweep point is reported, not fatal
            log.warning("%s: sweep point %s=%r failed: %s", name, param, v, exc)
            return None
        return RocPoint(
            float(v),
            _nanmean([s.fpr for s in per]),
            _nanmean([s.tpr for s in per]),
            _nanmean([s.sr for s in per]),
            _nanmean([s.nr for s in per]),
            _nanmean([s.hpr for s in per]),
            _nanmean([s.da for s in per]),
        )

    results = _map(at, list(values), jobs)
    points = [p for p in results if p is not None]
    failed = [float(v) for v, p in zip(values, results) if p is None]
    valid = [p for p in points if not (math.isnan(p.fpr) or math.isnan(p.tpr))]
    area = auc([p.fpr for p in valid], [p.tpr for p in valid])
    return RocReport(name, param, points, area, best_point(points), failed)


def roc_sweep_filter(name: str, dataset: Sequence[EventStream], values=None,
                     params: Optional[dict] = None, window_us=None, jobs: int = 1) -> RocReport:
    from .filters import get_filter, run_filter

    spec = get_filter(name)
    values = spec.sweep.values() if values is None else values
    base = dict(params or {})

    def masker(stream, v):
        return run_filter(name, stream, {**base, spec.sweep.param: v}, window_us)

    return roc_sweep(masker, values, dataset, name, spec.sweep.param, jobs)


def roc_from_scores(scores_per_stream, labels_per_stream, thresholds) -> list[RocPoint]:
    """ROC points for continuous classifier outputs: keep iff score >= threshold."""
    pts = []
    for th in thresholds:
        per = [score(np.asarray(s) >= th, l) for s, l in zip(scores_per_stream, labels_per_stream)]
        pts.append(RocPoint(float(th), _nanmean([p.fpr for p in per]), _nanmean([p.tpr for p in per]),
                            _nanmean([p.sr for p in per]), _nanmean([p.nr for p in per]),
                            _nanmean([p.hpr for p in per]), _nanmean([p.da for p in per])))
    return pts


def report_from_points(name, param, points) -> RocReport:
    valid = [p for p in points if not (math.isnan(p.fpr) or math.isnan(p.tpr))]
    return RocReport(name, param, list(points), auc([p.fpr for p in valid], [p.tpr for p in valid]),
                     best_point(points))


# ------------------------------------------------------- window experiment

@dataclass
class WindowRow:
    size: float
    sr: float
    nr: float
    n_slices: int
    n_streams: int


def window_sweep(masker: Callable, dataset: Sequence[EventStream], sizes=range(1, 21),
                 stride_fraction: float = 0.2, jobs: int = 1,
                 min_coverage: float = 0.99) -> list[WindowRow]:
    """For each window size (s), slice every stream with stride size/5, filter
    each slice from a fresh state, and average SR and NR over slices, then
    over streams.

    A stream whose event span is below ``min_coverage`` of the window is
    skipped for that size (the first event rarely sits exactly at t=0).
    """
    rows = []
    for size in sizes:
        size = float(size)
        per_stream_sr, per_stream_nr = [], []
        n_slices = 0
        for idx, stream in enumerate(dataset):
            if stream.span < min_coverage * size * 1e6:
                log.info("stream %d shorter than %.0f s window; skipped", idx, size)
                continue
            slices = slice_windows(stream, size, size * stride_fraction)
            per = _map(lambda s: score(masker(s), s), slices, jobs)
            n_slices += len(per)
            per_stream_sr.append(_nanmean([p.sr for p in per]))
            per_stream_nr.append(_nanmean([p.nr for p in per]))
        rows.append(WindowRow(size, _nanmean(per_stream_sr), _nanmean(per_stream_nr),
                              n_slices, len(per_stream_sr)))
    return rows
