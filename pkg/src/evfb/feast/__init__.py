"""Supervised FEAST denoiser and its linear classifier head."""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from ..evstream import EventStream
from ..metrics import RocReport, report_from_points, roc_from_scores, roc_sweep
from .classifier import (ClassifierFit, FeatureState, NormalEquations, Opium, build_features,
                         classifier_infer, classifier_scores, fit_classifier, opium_fit, stream_scores)
from .network import (Activations, FeastModel, FeastParams, NeuronBank, activations, classify_context,
                      feast_infer, feast_scores, feast_train, train_bank)
from .timesurface import TimeSurfaceState, event_context, update_time_surface

log = logging.getLogger(__name__)

TAU_SWEEP = [float(v) for v in np.geomspace(1e2, 1e8, 13)]


def split_recordings(streams: Sequence[EventStream], seed: int = 0):
    """50/50 train/test split by recording (train gets the extra one when odd)."""
    order = np.random.default_rng(seed).permutation(len(streams))
    half = (len(streams) + 1) // 2
    return [streams[i] for i in sorted(order[:half])], [streams[i] for i in sorted(order[half:])]


def feast_roc(model: FeastModel, test: Sequence[EventStream], taus=None, jobs: int = 1) -> RocReport:
    """ROC over the inference-time decay constant."""
    taus = TAU_SWEEP if taus is None else taus
    return roc_sweep(lambda s, tau: feast_infer(s, model, tau), taus, test, "feast", "tau", jobs)


def classifier_roc(model: FeastModel, fit: ClassifierFit, test: Sequence[EventStream],
                   thresholds=None) -> RocReport:
    """ROC over the readout threshold; star events are excluded from scoring like everywhere else."""
    thresholds = np.linspace(0, 1, 50) if thresholds is None else thresholds
    scores = [stream_scores(s, model, fit.W) for s in test]
    pts = roc_from_scores(scores, [s.label for s in test], thresholds)
    return report_from_points("feast+classifier", "threshold", pts)


__all__ = [
    "Activations", "ClassifierFit", "FeastModel", "FeastParams", "FeatureState", "NeuronBank",
    "NormalEquations", "Opium", "TAU_SWEEP", "TimeSurfaceState", "activations", "build_features",
    "classifier_infer", "classifier_roc", "classifier_scores", "classify_context", "event_context",
    "feast_infer", "feast_roc", "feast_scores", "feast_train", "fit_classifier", "opium_fit",
    "split_recordings", "stream_scores", "train_bank", "update_time_surface",
]
