"""Causal per-event denoisers.

Each kernel walks the events once in arrival order and writes a keep mask;
state (timestamp maps, ring buffers) starts empty on every call.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..evstream import EventStream

NEVER = np.int64(-(2 ** 62))


def _cols(s: EventStream):
    return s.t, s.x, s.y


# ------------------------------------------------------------------ KNoise

@njit(cache=True, nogil=True)
def _knoise(t, x, y, width, height, delta):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    col_t = np.full(width, NEVER, dtype=np.int64)
    col_y = np.zeros(width, dtype=np.int64)
    row_t = np.full(height, NEVER, dtype=np.int64)
    row_x = np.zeros(height, dtype=np.int64)
    for i in range(n):
        ti, xi, yi = t[i], x[i], y[i]
        ok = False
        for d in range(-1, 2):
            c = xi + d
            if 0 <= c < width and col_t[c] != NEVER and ti - col_t[c] <= delta:
                oy = col_y[c]
                if abs(oy - yi) <= 1 and not (d == 0 and oy == yi):
                    ok = True
                    break
            r = yi + d
            if 0 <= r < height and row_t[r] != NEVER and ti - row_t[r] <= delta:
                ox = row_x[r]
                if abs(ox - xi) <= 1 and not (d == 0 and ox == xi):
                    ok = True
                    break
        keep[i] = ok
        col_t[xi] = ti
        col_y[xi] = yi
        row_t[yi] = ti
        row_x[yi] = xi
    return keep


def knoise(stream: EventStream, delta: float = 1e6) -> np.ndarray:
    """Keep an event when the per-column / per-row memory holds a different pixel
    of its 8-neighbourhood that fired within ``delta`` us."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    t, x, y = _cols(stream)
    return _knoise(t, x, y, stream.width, stream.height, np.int64(delta))


# ------------------------------------------------------------- FWF / DWF

@njit(cache=True, nogil=True)
def _fwf(x, y, thr, L):
    n = x.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    bx = np.zeros(L, dtype=np.int64)
    by = np.zeros(L, dtype=np.int64)
    filled = 0
    head = 0
    for i in range(n):
        xi, yi = x[i], y[i]
        dmin = 1 << 40
        for j in range(filled):
            d = abs(bx[j] - xi) + abs(by[j] - yi)
            if d < dmin:
                dmin = d
        keep[i] = filled > 0 and dmin <= thr
        bx[head] = xi
        by[head] = yi
        head = (head + 1) % L
        if filled < L:
            filled += 1
    return keep


def fwf(stream: EventStream, distance_threshold: float = 4, L: int = 175) -> np.ndarray:
    """Fixed window filter: keep when the Manhattan distance to the nearest of the
    last ``L`` events is at most ``distance_threshold``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    return _fwf(stream.x, stream.y, np.float64(distance_threshold), int(L))


@njit(cache=True, nogil=True)
def _dwf(x, y, thr, L, signal_only, promote):
    n = x.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    sx = np.zeros(L, dtype=np.int64)
    sy = np.zeros(L, dtype=np.int64)
    nx = np.zeros(L, dtype=np.int64)
    ny = np.zeros(L, dtype=np.int64)
    s_fill = 0
    s_head = 0
    n_fill = 0
    n_head = 0
    for i in range(n):
        xi, yi = x[i], y[i]
        ds = 1 << 40
        for j in range(s_fill):
            d = abs(sx[j] - xi) + abs(sy[j] - yi)
            if d < ds:
                ds = d
        dn = 1 << 40
        for j in range(n_fill):
            d = abs(nx[j] - xi) + abs(ny[j] - yi)
            if d < dn:
                dn = d
        dmin = ds if signal_only else min(ds, dn)
        ok = dmin <= thr or (promote and dn == 0)
        if ok:
            keep[i] = True
            sx[s_head] = xi
            sy[s_head] = yi
            s_head = (s_head + 1) % L
            if s_fill < L:
                s_fill += 1
        else:
            nx[n_head] = xi
            ny[n_head] = yi
            n_head = (n_head + 1) % L
            if n_fill < L:
                n_fill += 1
    return keep


def dwf(stream: EventStream, distance_threshold: float = 4, L: int = 175,
        signal_only: bool = False, promote: bool = False) -> np.ndarray:
    """Dual window filter: separate L-event memories for kept and dropped events.

    An event is kept when its nearest neighbour is within ``distance_threshold``
    and is then stored in the signal memory, otherwise in the noise memory.
    The nearest neighbour is searched over both memories unless
    ``signal_only``; ``promote`` also keeps events that repeat a pixel held in
    the noise memory.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    return _dwf(stream.x, stream.y, np.float64(distance_threshold), int(L), bool(signal_only), bool(promote))


# ------------------------------------------------- STCF / STDF / YNoise

@njit(cache=True, nogil=True)
def _count_support(t, x, y, width, height, window, radius, k):
    """Keep when >= k earlier events lie within Chebyshev ``radius`` (own pixel
    included) and ``window`` us.  Each pixel remembers only its last k stamps,
    which is enough to decide ">= k"."""
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    hist = np.full((height, width, k), NEVER, dtype=np.int64)
    head = np.zeros((height, width), dtype=np.int64)
    for i in range(n):
        ti, xi, yi = t[i], x[i], y[i]
        cnt = 0
        y0 = max(yi - radius, 0)
        y1 = min(yi + radius, height - 1)
        x0 = max(xi - radius, 0)
        x1 = min(xi + radius, width - 1)
        for yy in range(y0, y1 + 1):
            for xx in range(x0, x1 + 1):
                for j in range(k):
                    if ti - hist[yy, xx, j] <= window:
                        cnt += 1
                if cnt >= k:
                    break
            if cnt >= k:
                break
        keep[i] = cnt >= k
        h = head[yi, xi]
        hist[yi, xi, h] = ti
        head[yi, xi] = (h + 1) % k
    return keep


def stcf(stream: EventStream, tau: float = 1e5, k: int = 4) -> np.ndarray:
    """Keep when at least ``k`` events hit the 3x3 neighbourhood in the last ``tau`` us."""
    if k < 1 or tau <= 0:
        raise ValueError("need k >= 1 and tau > 0")
    t, x, y = _cols(stream)
    return _count_support(t, x, y, stream.width, stream.height, np.int64(tau), 1, int(k))


def stdf(stream: EventStream, duration: float = 1e5, correlation: int = 3) -> np.ndarray:
    """3x3 density rule with ``correlation`` supporting events inside ``duration`` us."""
    if correlation < 1 or duration <= 0:
        raise ValueError("need correlation >= 1 and duration > 0")
    t, x, y = _cols(stream)
    return _count_support(t, x, y, stream.width, stream.height, np.int64(duration), 1, int(correlation))


def ynoise(stream: EventStream, duration: float = 1e5, radius: int = 5,
           density_threshold: int = 2) -> np.ndarray:
    """Keep when the (2r+1)^2 spatiotemporal neighbourhood holds at least
    ``density_threshold`` earlier events within ``duration`` us."""
    if radius < 1 or density_threshold < 1:
        raise ValueError("need radius >= 1 and density_threshold >= 1")
    t, x, y = _cols(stream)
    return _count_support(t, x, y, stream.width, stream.height, np.int64(duration),
                          int(radius), int(density_threshold))


# ------------------------------------------------------------ time surface

@njit(cache=True, nogil=True)
def _ts(t, x, y, width, height, thr, radius):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    last = np.full((height, width), NEVER, dtype=np.int64)
    for i in range(n):
        ti, xi, yi = t[i], x[i], y[i]
        ok = False
        for yy in range(max(yi - radius, 0), min(yi + radius, height - 1) + 1):
            for xx in range(max(xi - radius, 0), min(xi + radius, width - 1) + 1):
                if (xx != xi or yy != yi) and ti - last[yy, xx] < thr:
                    ok = True
                    break
            if ok:
                break
        keep[i] = ok
        last[yi, xi] = ti
    return keep


def ts_filter(stream: EventStream, time_threshold: float = 1e5, decay: float = 1e6,
              radius: int = 5) -> np.ndarray:
    """Time-surface filter: keep when some other pixel within ``radius`` fired less
    than ``time_threshold`` us ago.

    Equivalent to thresholding the surface exp(-dt/decay) at
    exp(-time_threshold/decay); ``decay`` only sets that scale.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if decay <= 0:
        raise ValueError("decay must be positive")
    t, x, y = _cols(stream)
    return _ts(t, x, y, stream.width, stream.height, np.float64(time_threshold), int(radius))


def ts_surface_threshold(time_threshold: float, decay: float = 1e6) -> float:
    return float(np.exp(-time_threshold / decay))


# ------------------------------------------------------------------ EvFlow

@njit(cache=True, nogil=True)
def _evflow(t, x, y, width, height, duration, radius, max_grad):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    last = np.full((height, width), NEVER, dtype=np.int64)
    for i in range(n):
        ti, xi, yi = t[i], x[i], y[i]
        last[yi, xi] = ti
        # normal equations for dt = a*dx + b*dy + c
        sxx = sxy = syy = sx = sy = s1 = 0.0
        sxt = syt = st = 0.0
        for yy in range(max(yi - radius, 0), min(yi + radius, height - 1) + 1):
            for xx in range(max(xi - radius, 0), min(xi + radius, width - 1) + 1):
                lt = last[yy, xx]
                if lt == NEVER or ti - lt > duration:
                    continue
                dx = float(xx - xi)
                dy = float(yy - yi)
                dt = float(lt - ti)
                sxx += dx * dx
                sxy += dx * dy
                syy += dy * dy
                sx += dx
                sy += dy
                s1 += 1.0
                sxt += dx * dt
                syt += dy * dt
                st += dt
        if s1 < 3.0:
            continue
        # 3x3 solve by Cramer's rule; collinear support -> singular
        det = (sxx * (syy * s1 - sy * sy) - sxy * (sxy * s1 - sy * sx)
               + sx * (sxy * sy - syy * sx))
        if abs(det) < 1e-9:
            continue
        a = (sxt * (syy * s1 - sy * sy) - sxy * (syt * s1 - sy * st)
             + sx * (syt * sy - syy * st)) / det
        b = (sxx * (syt * s1 - st * sy) - sxt * (sxy * s1 - sy * sx)
             + sx * (sxy * st - syt * sx)) / det
        g = np.sqrt(a * a + b * b)
        keep[i] = g > 0.0 and g <= max_grad
    return keep


def evflow(stream: EventStream, duration: float = 1e5, radius: int = 1,
           flow_threshold: float = 1e5) -> np.ndarray:
    """Local plane fit of the latest timestamps around each event.

    The event is kept when the fit has at least 3 non-collinear points within
    ``duration`` us and the time gradient magnitude (us/px, the inverse of the
    local speed) lies in (0, flow_threshold].
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    t, x, y = _cols(stream)
    return _evflow(t, x, y, stream.width, stream.height, np.float64(duration),
                   int(radius), np.float64(flow_threshold))


# -------------------------------------------------------------------- IETS

@njit(cache=True, nogil=True)
def _iets(t, x, y, p, width, height, isolation):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    last = np.full((2, height, width), NEVER, dtype=np.int64)
    for i in range(n):
        c = 1 if p[i] > 0 else 0
        prev = last[c, y[i], x[i]]
        keep[i] = prev == NEVER or t[i] - prev > isolation
        last[c, y[i], x[i]] = t[i]
    return keep


def iets(stream: EventStream, window_size: float = 1e4, isolation=None) -> np.ndarray:
    """Keep inceptive events: the first of a same-pixel, same-polarity burst,
    i.e. whose predecessor is older than ``isolation`` us (defaults to
    ``window_size``)."""
    if window_size <= 0:
        raise ValueError("window_size must be positive")
    iso = window_size if isolation is None else isolation
    return _iets(stream.t, stream.x, stream.y, stream.p, stream.width, stream.height,
                 np.float64(iso))
