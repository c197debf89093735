"""Exponentially decaying time surface and normalised event contexts.

    I(u, t) = P(u) * exp((T(u) - t) / tau)

T holds the last timestamp per pixel and P its polarity (0 for a pixel that
never fired, so unvisited pixels contribute nothing).
"""
from __future__ import annotations

import numpy as np
from numba import njit

NEVER = np.int64(-(2 ** 62))


class TimeSurfaceState:
    def __init__(self, width: int, height: int, tau: float):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.width = int(width)
        self.height = int(height)
        self.tau = float(tau)
        self.T = np.full((self.height, self.width), NEVER, dtype=np.int64)
        self.P = np.zeros((self.height, self.width), dtype=np.int8)

    def reset(self) -> None:
        self.T.fill(NEVER)
        self.P.fill(0)

    def surface(self, t: int) -> np.ndarray:
        """Full-sensor I(u, t)."""
        seen = self.P != 0
        out = np.zeros(self.T.shape)
        out[seen] = self.P[seen] * np.exp((self.T[seen] - t) / self.tau)
        return out


def update_time_surface(state: TimeSurfaceState, event) -> None:
    t, x, y, p = event[:4]
    if not (0 <= x < state.width and 0 <= y < state.height):
        raise ValueError("event outside the sensor")
    state.T[y, x] = t
    state.P[y, x] = 1 if p > 0 else -1


@njit(cache=True, nogil=True)
def _patch(T, P, x, y, t, r, tau, out):
    H, W = T.shape
    R = r // 2
    k = 0
    norm = 0.0
    for yy in range(y - R, y + R + 1):
        for xx in range(x - R, x + R + 1):
            v = 0.0
            if 0 <= yy < H and 0 <= xx < W and P[yy, xx] != 0:
                v = P[yy, xx] * np.exp((T[yy, xx] - t) / tau)
            out[k] = v
            norm += v * v
            k += 1
    if norm > 0.0:
        s = 1.0 / np.sqrt(norm)
        for j in range(k):
            out[j] *= s


def event_context(state: TimeSurfaceState, event, r: int = 11) -> np.ndarray:
    """Row-major r*r patch of I around the event, divided by its L2 norm (zero stays zero)."""
    if r % 2 != 1:
        raise ValueError("context size must be odd")
    t, x, y = event[0], event[1], event[2]
    out = np.empty(r * r)
    _patch(state.T, state.P, int(x), int(y), np.int64(t), int(r), float(state.tau), out)
    return out


@njit(cache=True, nogil=True)
def replay_contexts(t, x, y, p, T, P, r, tau, start, stop, out):
    """Advance the surface through events [start, stop) and write each event's
    context (taken right after its own update) into ``out[i - start]``."""
    for i in range(start, stop):
        T[y[i], x[i]] = t[i]
        P[y[i], x[i]] = 1 if p[i] > 0 else -1
        _patch(T, P, x[i], y[i], t[i], r, tau, out[i - start])


@njit(cache=True, nogil=True)
def contexts_at(t, x, y, p, width, height, r, tau, wanted):
    """Contexts for the sorted event indices ``wanted`` after replaying the whole stream."""
    T = np.full((height, width), NEVER, dtype=np.int64)
    P = np.zeros((height, width), dtype=np.int8)
    out = np.empty((wanted.shape[0], r * r))
    j = 0
    n = t.shape[0]
    for i in range(n):
        if j >= wanted.shape[0]:
            break
        T[y[i], x[i]] = t[i]
        P[y[i], x[i]] = 1 if p[i] > 0 else -1
        if wanted[j] == i:
            _patch(T, P, x[i], y[i], t[i], r, tau, out[j])
            j += 1
    return out
