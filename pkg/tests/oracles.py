"""Slow reference implementations of the streaming filters.

Each one recomputes its decision for event i by scanning the raw history
t[:i], x[:i], y[:i] instead of keeping incremental state.
"""
import numpy as np


def knoise(s, delta):
    t, x, y = s.t, s.x, s.y
    keep = np.zeros(len(s), bool)
    for i in range(len(s)):
        ok = False
        for d in (-1, 0, 1):
            # column memory x+d holds the latest earlier event in that column
            idx = np.flatnonzero(x[:i] == x[i] + d)
            if idx.size:
                j = idx[-1]
                if t[i] - t[j] <= delta and abs(int(y[j]) - int(y[i])) <= 1 and not (d == 0 and y[j] == y[i]):
                    ok = True
            idx = np.flatnonzero(y[:i] == y[i] + d)
            if idx.size:
                j = idx[-1]
                if t[i] - t[j] <= delta and abs(int(x[j]) - int(x[i])) <= 1 and not (d == 0 and x[j] == x[i]):
                    ok = True
        keep[i] = ok
    return keep


def fwf(s, thr, L):
    x, y = s.x.astype(int), s.y.astype(int)
    keep = np.zeros(len(s), bool)
    for i in range(1, len(s)):
        lo = max(0, i - L)
        d = np.abs(x[lo:i] - x[i]) + np.abs(y[lo:i] - y[i])
        keep[i] = d.min() <= thr
    return keep


def dwf(s, thr, L):
    sig, noi = [], []
    keep = np.zeros(len(s), bool)
    for i, (xi, yi) in enumerate(zip(s.x.tolist(), s.y.tolist())):
        cands = [abs(a - xi) + abs(b - yi) for a, b in sig[-L:] + noi[-L:]]
        if cands and min(cands) <= thr:
            keep[i] = True
            sig.append((xi, yi))
        else:
            noi.append((xi, yi))
    return keep


def count_support(s, window, radius, k):
    t, x, y = s.t, s.x.astype(int), s.y.astype(int)
    keep = np.zeros(len(s), bool)
    for i in range(len(s)):
        near = (np.abs(x[:i] - x[i]) <= radius) & (np.abs(y[:i] - y[i]) <= radius) & (t[i] - t[:i] <= window)
        keep[i] = near.sum() >= k
    return keep


def ts(s, thr, radius):
    t, x, y = s.t, s.x.astype(int), s.y.astype(int)
    keep = np.zeros(len(s), bool)
    for i in range(len(s)):
        other = (x[:i] != x[i]) | (y[:i] != y[i])
        near = other & (np.abs(x[:i] - x[i]) <= radius) & (np.abs(y[:i] - y[i]) <= radius)
        keep[i] = bool(np.any(t[i] - t[:i][near] < thr))
    return keep


def iets(s, isolation):
    t, x, y, p = s.t, s.x, s.y, s.p
    keep = np.zeros(len(s), bool)
    for i in range(len(s)):
        same = np.flatnonzero((x[:i] == x[i]) & (y[:i] == y[i]) & (p[:i] == p[i]))
        keep[i] = same.size == 0 or t[i] - t[same[-1]] > isolation
    return keep


def evflow(s, duration, radius, max_grad):
    """Plane fit by numpy least squares over each pixel's latest timestamp."""
    t, x, y = s.t, s.x.astype(int), s.y.astype(int)
    keep = np.zeros(len(s), bool)
    for i in range(len(s)):
        last = {}
        for j in range(i + 1):
            if abs(x[j] - x[i]) <= radius and abs(y[j] - y[i]) <= radius:
                last[(x[j], y[j])] = t[j]
        pts = [(a - x[i], b - y[i], tj - t[i]) for (a, b), tj in last.items() if t[i] - tj <= duration]
        if len(pts) < 3:
            continue
        A = np.array([[p[0], p[1], 1.0] for p in pts])
        if np.linalg.matrix_rank(A) < 3:
            continue
        sol = np.linalg.lstsq(A, np.array([p[2] for p in pts], float), rcond=None)[0]
        g = np.hypot(sol[0], sol[1])
        keep[i] = 0 < g <= max_grad
    return keep
