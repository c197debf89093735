"""Supervised two-bank FEAST.

Each labeled event's context trains only the bank of its class (signal:
satellites and stars, noise: background and hot pixels).  At inference the
adaptive thresholds are dropped and the bank owning the best-matching neuron
decides the class.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from ..evstream import EventStream, Label
from .timesurface import NEVER, contexts_at, replay_contexts

log = logging.getLogger(__name__)

SIGNAL_LABELS = (int(Label.SATELLITE), int(Label.STAR))
NOISE_LABELS = (int(Label.NOISE), int(Label.HOT_PIXEL))


@dataclass
class FeastParams:
    r: int = 11
    N: int = 200
    tau: float = 1e5
    theta_plus: float = 0.001
    theta_minus: float = 0.002
    eta_background: float = 0.0005
    eta_foreground: float = 0.01
    epochs: int = 10
    # cap on training contexts per class, drawn uniformly over the training streams
    max_events_per_class: int = 300000
    seed: int = 0

    def validate(self) -> None:
        if self.r < 1 or self.r % 2 != 1:
            raise ValueError("r must be odd and positive")
        if self.N < 1 or self.epochs < 0:
            raise ValueError("N must be >= 1 and epochs >= 0")
        for name in ("tau", "theta_plus", "theta_minus"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eta_background < 0 or self.eta_foreground < 0:
            raise ValueError("learning rates must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "FeastParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown FEAST parameters {sorted(unknown)}")
        return cls(**d)


@dataclass
class NeuronBank:
    cls: str                 # "signal" or "noise"
    weights: np.ndarray      # (N, r*r), unit rows
    thresholds: np.ndarray   # (N,)
    wins: np.ndarray = None

    @property
    def N(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def random(cls, name: str, N: int, r: int, rng: np.random.Generator) -> "NeuronBank":
        w = rng.random((N, r * r))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        th = rng.random(N) * 0.5
        return cls(name, w, th, np.zeros(N, dtype=np.int64))


@dataclass
class FeastModel:
    signal: NeuronBank
    noise: NeuronBank
    params: FeastParams

    @property
    def r(self) -> int:
        return self.params.r

    def stacked(self) -> np.ndarray:
        """(2N, r*r): signal neurons first, then noise neurons."""
        return np.vstack([self.signal.weights, self.noise.weights])

    def to_dict(self) -> dict:
        p = self.params
        return {
            "r": p.r, "N": p.N, "seed": p.seed, "params": asdict(p),
            "banks": [
                {"class": b.cls, "weights": b.weights.tolist(), "thresholds": b.thresholds.tolist()}
                for b in (self.signal, self.noise)
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "FeastModel":
        params = FeastParams.from_dict(d.get("params", {"r": d["r"], "N": d["N"], "seed": d.get("seed", 0)}))
        banks = {}
        for b in d["banks"]:
            w = np.asarray(b["weights"], dtype=np.float64)
            if w.shape != (params.N, params.r * params.r):
                raise ValueError(f"bank {b['class']!r} has weights of shape {w.shape}")
            banks[b["class"]] = NeuronBank(b["class"], w, np.asarray(b["thresholds"], dtype=np.float64))
        return cls(banks["signal"], banks["noise"], params)

    @classmethod
    def load(cls, path) -> "FeastModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------ training

@njit(cache=True, nogil=True)
def _bank_step(W, thr, wins, c, eta, th_plus, th_minus):
    """One FEAST update; returns the winner index or -1."""
    N, D = W.shape
    best = -1
    best_d = -np.inf
    for k in range(N):
        d = 0.0
        for j in range(D):
            d += W[k, j] * c[j]
        if d >= thr[k] and d > best_d:
            best_d = d
            best = k
    if best < 0:
        for k in range(N):
            thr[k] -= th_minus
        return -1
    thr[best] += th_plus
    wins[best] += 1
    if eta == 0.0:
        return best
    norm = 0.0
    for j in range(D):
        v = (1.0 - eta) * W[best, j] + eta * c[j]
        W[best, j] = v
        norm += v * v
    if norm > 0.0:
        s = 1.0 / np.sqrt(norm)
        for j in range(D):
            W[best, j] *= s
    return best


@njit(cache=True, nogil=True)
def _train_epoch(C, order, W, thr, wins, eta, th_plus, th_minus):
    for i in order:
        _bank_step(W, thr, wins, C[i], eta, th_plus, th_minus)


def train_bank(bank: NeuronBank, contexts: np.ndarray, eta: float, theta_plus: float,
               theta_minus: float, epochs: int, rng: np.random.Generator) -> NeuronBank:
    """Train one bank in place on a fixed set of contexts, reshuffled every epoch."""
    if bank.wins is None:
        bank.wins = np.zeros(bank.N, dtype=np.int64)
    C = np.ascontiguousarray(contexts, dtype=np.float64)
    for _ in range(epochs):
        order = rng.permutation(len(C))
        _train_epoch(C, order, bank.weights, bank.thresholds, bank.wins, eta, theta_plus, theta_minus)
    return bank


def _sample_indices(streams, labels_set, cap, rng):
    """Per stream, sorted event indices of the class, jointly capped at ``cap``."""
    pools = [np.flatnonzero(np.isin(s.label, labels_set)) for s in streams]
    total = sum(len(p) for p in pools)
    if total <= cap:
        return pools
    pick = np.sort(rng.choice(total, size=cap, replace=False))
    out, off = [], 0
    for p in pools:
        sel = pick[(pick >= off) & (pick < off + len(p))] - off
        out.append(p[sel])
        off += len(p)
    return out


def training_contexts(streams: Sequence[EventStream], params: FeastParams, rng) -> tuple[np.ndarray, np.ndarray]:
    """Contexts of the sampled signal-class and noise-class training events."""
    sig_idx = _sample_indices(streams, SIGNAL_LABELS, params.max_events_per_class, rng)
    noi_idx = _sample_indices(streams, NOISE_LABELS, params.max_events_per_class, rng)
    sig, noi = [], []
    for s, si, ni in zip(streams, sig_idx, noi_idx):
        both = np.union1d(si, ni).astype(np.int64)
        if both.size == 0:
            continue
        C = contexts_at(s.t, s.x, s.y, s.p, s.width, s.height, params.r, params.tau, both)
        is_sig = np.isin(both, si)
        sig.append(C[is_sig])
        noi.append(C[~is_sig])
    D = params.r * params.r
    cat = lambda xs: np.concatenate(xs) if xs else np.zeros((0, D))
    return cat(sig), cat(noi)


def feast_train(streams: Sequence[EventStream], params: Optional[FeastParams] = None) -> FeastModel:
    """Supervised training of the signal and noise banks."""
    params = params or FeastParams()
    params.validate()
    streams = list(streams)
    if any(not s.labeled for s in streams):
        raise ValueError("FEAST training needs labeled streams")
    rng = np.random.default_rng(params.seed)
    signal = NeuronBank.random("signal", params.N, params.r, rng)
    noise = NeuronBank.random("noise", params.N, params.r, rng)
    C_sig, C_noi = training_contexts(streams, params, rng)
    log.info("FEAST training on %d signal / %d noise contexts", len(C_sig), len(C_noi))
    train_bank(signal, C_sig, params.eta_foreground, params.theta_plus, params.theta_minus, params.epochs, rng)
    train_bank(noise, C_noi, params.eta_background, params.theta_plus, params.theta_minus, params.epochs, rng)
    return FeastModel(signal, noise, params)


# ----------------------------------------------------------------- inference

def classify_context(context: np.ndarray, model: FeastModel) -> bool:
    """True for signal; exact ties between the two banks go to noise."""
    ds = model.signal.weights @ context
    dn = model.noise.weights @ context
    return bool(ds.max() > dn.max())


@dataclass
class Activations:
    winner: np.ndarray       # (n,) neuron id in [0, 2N): signal ids first
    best_signal: np.ndarray  # (n,) max dot product over the signal bank
    best_noise: np.ndarray   # (n,) max dot product over the noise bank

    @property
    def is_signal(self) -> np.ndarray:
        return self.best_signal > self.best_noise


def activations(stream: EventStream, model: FeastModel, tau: Optional[float] = None,
                chunk: int = 1 << 15) -> Activations:
    """Winner neuron and per-bank best match for every event (causal replay)."""
    tau = model.params.tau if tau is None else float(tau)
    r = model.r
    N = model.params.N
    Wt = model.stacked().T.astype(np.float32, order="C")
    n = len(stream)
    winner = np.empty(n, dtype=np.int32)
    bs = np.empty(n, dtype=np.float64)
    bn = np.empty(n, dtype=np.float64)
    T = np.full((stream.height, stream.width), NEVER, dtype=np.int64)
    P = np.zeros((stream.height, stream.width), dtype=np.int8)
    buf = np.empty((min(chunk, max(n, 1)), r * r))
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        C = buf[: b - a]
        replay_contexts(stream.t, stream.x, stream.y, stream.p, T, P, r, tau, a, b, C)
        d = C.astype(np.float32) @ Wt
        bs[a:b] = d[:, :N].max(axis=1)
        bn[a:b] = d[:, N:].max(axis=1)
        w = d.argmax(axis=1)
        # exact cross-bank ties go to the noise bank
        tie = bs[a:b] == bn[a:b]
        w[tie] = N + d[tie, N:].argmax(axis=1)
        winner[a:b] = w
    return Activations(winner, bs, bn)


def feast_infer(stream: EventStream, model: FeastModel, tau: Optional[float] = None) -> np.ndarray:
    """Keep mask: True where the winning neuron belongs to the signal bank."""
    return activations(stream, model, tau).is_signal


def feast_scores(stream: EventStream, model: FeastModel, tau: Optional[float] = None) -> np.ndarray:
    """Signal-minus-noise margin of the best matches; > 0 means classified as signal."""
    a = activations(stream, model, tau)
    return a.best_signal - a.best_noise
