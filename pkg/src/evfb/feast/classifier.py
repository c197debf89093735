"""FEAST+Classifier head.

The winning neuron of every event writes its (exponentially decaying)
activation into a downsampled feature map with one channel per neuron.  A
3x3 cell neighbourhood of that map, flattened over all 2N channels, is the
event's feature vector.  A ridge-regularised linear readout (batch solve or
the equivalent online pseudo-inverse update) maps features to a satellite
score.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from numba import njit

from ..evstream import EventStream, Label
from .network import FeastModel, activations
from .timesurface import NEVER

log = logging.getLogger(__name__)

DOWNSAMPLE = 5
POOL = 3
# decayed values below exp(-PRUNE) are treated as zero
PRUNE = 30.0


class FeatureState:
    """Per (cell, neuron) last-write timestamp of the downsampled feature map.

    Decay is monotone in time, so max-pooling a 5x5 block of the full
    resolution map equals the decayed value of its most recent write.
    """

    def __init__(self, width: int, height: int, n_neurons: int, tau: float, downsample: int = DOWNSAMPLE):
        self.downsample = int(downsample)
        self.wd = -(-int(width) // self.downsample)
        self.hd = -(-int(height) // self.downsample)
        self.n_neurons = int(n_neurons)
        self.tau = float(tau)
        self.T = np.full((self.hd, self.wd, self.n_neurons), NEVER, dtype=np.int64)

    @property
    def n_features(self) -> int:
        return POOL * POOL * self.n_neurons


@njit(cache=True, nogil=True)
def _feature_chunk(t, x, y, winner, T, tau, ds, start, stop, indptr, indices, data, prune):
    """Write and pool events [start, stop) into CSR buffers.

    Returns the number of complete rows.  On buffer overflow it stops early;
    re-running the interrupted event is harmless since its map write is
    idempotent."""
    hd, wd, K = T.shape
    nnz = 0
    cap = indices.shape[0]
    indptr[0] = 0
    horizon = prune * tau
    for i in range(start, stop):
        xd = x[i] // ds
        yd = y[i] // ds
        T[yd, xd, winner[i]] = t[i]
        for dy in range(-1, 2):
            yy = yd + dy
            if yy < 0 or yy >= hd:
                continue
            for dx in range(-1, 2):
                xx = xd + dx
                if xx < 0 or xx >= wd:
                    continue
                base = ((dy + 1) * 3 + (dx + 1)) * K
                for k in range(K):
                    age = t[i] - T[yy, xx, k]
                    if age > horizon:
                        continue
                    if nnz >= cap:
                        return i - start
                    indices[nnz] = base + k
                    data[nnz] = math.exp(-age / tau)
                    nnz += 1
        indptr[i - start + 1] = nnz
    return stop - start


def _feature_blocks(stream: EventStream, winner: np.ndarray, state: FeatureState, chunk: int = 8192):
    """Yield (start, stop, csr) for consecutive event chunks, state persisting."""
    n = len(stream)
    cap = chunk * 64
    indices = np.empty(cap, dtype=np.int32)
    data = np.empty(cap, dtype=np.float64)
    a = 0
    while a < n:
        b = min(a + chunk, n)
        indptr = np.zeros(b - a + 1, dtype=np.int64)
        done = _feature_chunk(stream.t, stream.x, stream.y, winner, state.T, state.tau,
                              state.downsample, a, b, indptr, indices, data, PRUNE)
        if done == 0:
            cap *= 4
            indices = np.empty(cap, dtype=np.int32)
            data = np.empty(cap, dtype=np.float64)
            continue
        nnz = indptr[done]
        csr = scipy.sparse.csr_matrix((data[:nnz].copy(), indices[:nnz].copy(), indptr[:done + 1]),
                                      shape=(done, state.n_features))
        yield a, a + done, csr
        a += done


def build_features(stream: EventStream, model: FeastModel, winner: Optional[np.ndarray] = None,
                   downsample: int = DOWNSAMPLE) -> scipy.sparse.csr_matrix:
    """Sparse feature matrix of shape (n_events, 9 * 2N)."""
    if winner is None:
        winner = activations(stream, model).winner
    state = FeatureState(stream.width, stream.height, 2 * model.params.N, model.params.tau, downsample)
    blocks = [csr for _, _, csr in _feature_blocks(stream, np.asarray(winner, dtype=np.int64), state)]
    if not blocks:
        return scipy.sparse.csr_matrix((0, state.n_features))
    return scipy.sparse.vstack(blocks, format="csr")


# -------------------------------------------------------------- readout

@njit(cache=True, nogil=True)
def _accumulate(indptr, indices, data, rows, target, G, b):
    """G += X_r^T X_r and b += X_r^T y_r over the selected CSR rows."""
    for r in rows:
        lo = indptr[r]
        hi = indptr[r + 1]
        yr = target[r]
        for u in range(lo, hi):
            iu = indices[u]
            vu = data[u]
            b[iu] += vu * yr
            for v in range(lo, hi):
                G[iu, indices[v]] += vu * data[v]


class NormalEquations:
    """Streaming accumulator of X^T X and X^T y."""

    def __init__(self, n_features: int):
        self.G = np.zeros((n_features, n_features))
        self.b = np.zeros(n_features)
        self.n = 0
        self.n_pos = 0

    def add(self, X: scipy.sparse.csr_matrix, y: np.ndarray, rows: Optional[np.ndarray] = None) -> None:
        X = X.tocsr()
        y = np.asarray(y, dtype=np.float64)
        rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
        _accumulate(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data, rows, y, self.G, self.b)
        self.n += len(rows)
        self.n_pos += int((y[rows] > 0).sum())

    def solve(self, alpha: float = 1e-6) -> np.ndarray:
        if self.n and self.n_pos in (0, self.n):
            log.warning("degenerate labels: all %d training rows belong to one class", self.n)
        return _ridge_solve(self.G, self.b, alpha)


def _ridge_solve(G, b, alpha):
    A = G + alpha * np.eye(G.shape[0])
    try:
        c = scipy.linalg.cho_factor(A, lower=False, check_finite=False)
        return scipy.linalg.cho_solve(c, b, check_finite=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.solve(A, b, assume_a="sym")


def opium_fit(X, Y, alpha: float = 1e-6) -> np.ndarray:
    """W minimising ||XW - Y||^2 + alpha ||W||^2, i.e. (X^T X + alpha I)^-1 X^T Y."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    Y = np.asarray(Y, dtype=np.float64)
    if scipy.sparse.issparse(X):
        G = (X.T @ X).toarray()
        b = np.asarray(X.T @ Y)
    else:
        X = np.asarray(X, dtype=np.float64)
        G = X.T @ X
        b = X.T @ Y
    yy = Y.ravel()
    if yy.size and (np.all(yy == yy[0])):
        log.warning("degenerate labels: all %d training rows belong to one class", yy.size)
    return _ridge_solve(G, b, alpha)


class Opium:
    """Online pseudo-inverse update (recursive least squares).

    Starting from P = I / alpha, feeding every row once reproduces the batch
    ridge solution of ``opium_fit``.
    """

    def __init__(self, n_features: int, n_outputs: int = 1, alpha: float = 1e-6):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.P = np.eye(n_features) / alpha
        self.W = np.zeros((n_features, n_outputs))

    def update(self, x, y) -> None:
        x = np.asarray(x, dtype=np.float64).ravel()
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        Px = self.P @ x
        k = Px / (1.0 + x @ Px)
        self.W += np.outer(k, y - x @ self.W)
        self.P -= np.outer(k, Px)

    def fit(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64).reshape(len(X), -1)
        for xi, yi in zip(X, Y):
            self.update(xi, yi)
        return self.W


def classifier_scores(X, W) -> np.ndarray:
    return np.asarray(X @ W).ravel()


def classifier_infer(X, W, threshold: float) -> np.ndarray:
    """Keep mask: score >= threshold."""
    return classifier_scores(X, W) >= threshold


# -------------------------------------------------------------- pipeline

@dataclass
class ClassifierFit:
    W: np.ndarray
    alpha: float
    n_rows: int
    n_positive: int


def _scored_rows(stream: EventStream) -> np.ndarray:
    """Rows used for fitting and scoring: everything except stars."""
    return np.flatnonzero(stream.label != Label.STAR)


def fit_classifier(streams: Sequence[EventStream], model: FeastModel, alpha: float = 1e-6) -> ClassifierFit:
    """Accumulate normal equations over the training recordings and solve.

    Star events still write the feature maps but are not used as rows."""
    D = POOL * POOL * 2 * model.params.N
    acc = NormalEquations(D)
    for s in streams:
        if not s.labeled:
            raise ValueError("classifier training needs labeled streams")
        winner = activations(s, model).winner.astype(np.int64)
        state = FeatureState(s.width, s.height, 2 * model.params.N, model.params.tau)
        target = (s.label == Label.SATELLITE).astype(np.float64)
        for a, b, X in _feature_blocks(s, winner, state):
            rows = np.flatnonzero(s.label[a:b] != Label.STAR)
            acc.add(X, target[a:b], rows)
    return ClassifierFit(acc.solve(alpha), alpha, acc.n, acc.n_pos)


def stream_scores(stream: EventStream, model: FeastModel, W: np.ndarray) -> np.ndarray:
    """Classifier score for every event of the stream (causal replay)."""
    winner = activations(stream, model).winner.astype(np.int64)
    state = FeatureState(stream.width, stream.height, 2 * model.params.N, model.params.tau)
    out = np.empty(len(stream))
    for a, b, X in _feature_blocks(stream, winner, state):
        out[a:b] = X @ W
    return out
