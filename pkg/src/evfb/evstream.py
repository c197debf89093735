"""Event data model, file I/O and temporal windowing.

Events live in column arrays (``t``, ``x``, ``y``, ``p`` and optionally
``label``) rather than per-event objects; every filter and metric works on
whole columns at once.  Timestamps are integer microseconds, polarity is
+1/-1 in memory and 0/1 on disk.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

MAGIC = b"EVS1"
HEADER = np.dtype([("magic", "S4"), ("width", "<u2"), ("height", "<u2"), ("labeled", "u1")])
RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])
RECORD_LABELED = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("label", "u1")])

MASK_MAGIC = b"MSK1"

US = 1_000_000


class Label(IntEnum):
    NOISE = 0
    SATELLITE = 1
    HOT_PIXEL = 2
    STAR = 3


class EventFormatError(ValueError):
    """Malformed event file; ``offset`` is a byte offset (binary) or line number (csv)."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class StreamValidationError(ValueError):
    pass


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


class LabeledEvent(NamedTuple):
    event: Event
    label: Label


@dataclass(frozen=True)
class Window:
    t_start: int
    duration: int

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("window duration must be positive")

    @property
    def t_end(self) -> int:
        return self.t_start + self.duration

    def contains(self, t):
        return (t >= self.t_start) & (t < self.t_end)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class EventStream:
    """Time-sorted events plus sensor geometry.  Immutable once built."""

    __slots__ = ("width", "height", "t", "x", "y", "p", "label")

    def __init__(self, width, height, t, x, y, p, label=None, validate=True):
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "height", int(height))
        object.__setattr__(self, "t", _frozen(np.asarray(t, dtype=np.int64)))
        object.__setattr__(self, "x", _frozen(np.asarray(x, dtype=np.int32)))
        object.__setattr__(self, "y", _frozen(np.asarray(y, dtype=np.int32)))
        object.__setattr__(self, "p", _frozen(np.asarray(p, dtype=np.int8)))
        if label is not None:
            label = _frozen(np.asarray(label, dtype=np.uint8))
        object.__setattr__(self, "label", label)
        if validate:
            self.validate()

    def __setattr__(self, name, value):
        raise AttributeError("EventStream is immutable")

    @classmethod
    def empty(cls, width, height, labeled=False):
        z = np.zeros(0, dtype=np.int64)
        return cls(width, height, z, z, z, z, z if labeled else None)

    def validate(self) -> None:
        n = len(self.t)
        if self.width <= 0 or self.height <= 0:
            raise StreamValidationError(f"bad geometry {self.width}x{self.height}")
        for name in ("x", "y", "p") + (("label",) if self.label is not None else ()):
            if len(getattr(self, name)) != n:
                raise StreamValidationError(f"column {name!r} has wrong length")
        if n == 0:
            return
        if self.t[0] < 0:
            raise StreamValidationError("negative timestamp")
        bad = np.flatnonzero(np.diff(self.t) < 0)
        if bad.size:
            raise StreamValidationError(f"timestamps not sorted at index {bad[0] + 1}")
        if self.x.min() < 0 or self.x.max() >= self.width:
            raise StreamValidationError("x out of bounds")
        if self.y.min() < 0 or self.y.max() >= self.height:
            raise StreamValidationError("y out of bounds")
        if not np.all(np.abs(self.p) == 1):
            raise StreamValidationError("polarity must be +1 or -1")
        if self.label is not None and self.label.max() > 3:
            raise StreamValidationError("label must be in 0..3")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            ev = Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))
            if self.label is None:
                return ev
            return LabeledEvent(ev, Label(int(self.label[i])))
        return self.take(i)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        if (self.width, self.height) != (other.width, other.height):
            return False
        if (self.label is None) != (other.label is None):
            return False
        cols = ("t", "x", "y", "p") + (("label",) if self.label is not None else ())
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in cols)

    def __repr__(self):
        span = f"{self.t[0]}..{self.t[-1]} us" if len(self) else "empty"
        kind = "labeled" if self.labeled else "unlabeled"
        return f"EventStream({self.width}x{self.height}, {len(self)} {kind} events, {span})"

    @property
    def labeled(self) -> bool:
        return self.label is not None

    @property
    def span(self) -> int:
        """Inclusive time span in microseconds (0 for an empty stream)."""
        return int(self.t[-1] - self.t[0] + 1) if len(self) else 0

    def take(self, index) -> "EventStream":
        """Sub-stream by boolean mask, slice or sorted index array."""
        lab = None if self.label is None else self.label[index]
        return EventStream(self.width, self.height, self.t[index], self.x[index],
                           self.y[index], self.p[index], lab, validate=False)

    def with_labels(self, label) -> "EventStream":
        return EventStream(self.width, self.height, self.t, self.x, self.y, self.p,
                           label, validate=True)

    def without_labels(self) -> "EventStream":
        return EventStream(self.width, self.height, self.t, self.x, self.y, self.p,
                           None, validate=False)

    def time_range(self, t0: int, t1: int) -> "EventStream":
        """Events with t0 <= t < t1."""
        i0, i1 = np.searchsorted(self.t, [t0, t1], side="left")
        return self.take(slice(i0, i1))


def concatenate(streams: Sequence[EventStream]) -> EventStream:
    """Join already-ordered streams end to end (no re-sorting)."""
    if not streams:
        raise ValueError("nothing to concatenate")
    w, h = streams[0].width, streams[0].height
    labeled = streams[0].labeled
    lab = np.concatenate([s.label for s in streams]) if labeled else None
    return EventStream(
        w, h,
        np.concatenate([s.t for s in streams]),
        np.concatenate([s.x for s in streams]),
        np.concatenate([s.y for s in streams]),
        np.concatenate([s.p for s in streams]),
        lab,
    )


# ---------------------------------------------------------------- windowing

def window_bounds(t0: int, span: int, window_us: int, stride_us: int) -> list[Window]:
    """Half-open windows anchored at ``t0`` that cover ``span`` microseconds.

    The last window is the first one reaching the end of the span, so the
    union of windows always covers every event.
    """
    if window_us <= 0 or stride_us <= 0:
        raise ValueError("window and stride must be positive")
    if span <= 0:
        return []
    n = max(0, -(-(span - window_us) // stride_us)) + 1
    return [Window(t0 + k * stride_us, window_us) for k in range(n)]


def slice_windows(stream: EventStream, window_size: float, stride: float,
                  span_us: Optional[int] = None) -> list[EventStream]:
    """Cut ``stream`` into half-open windows of ``window_size`` seconds every ``stride`` seconds.

    Windows are anchored at the first event.  ``span_us`` overrides the
    recording length (default: inclusive span of the events).
    """
    if window_size <= 0 or stride <= 0:
        raise ValueError("window_size and stride must be positive")
    if len(stream) == 0:
        return []
    w_us = int(round(window_size * US))
    s_us = int(round(stride * US))
    span = stream.span if span_us is None else int(span_us)
    wins = window_bounds(int(stream.t[0]), span, w_us, s_us)
    starts = np.array([w.t_start for w in wins], dtype=np.int64)
    lo = np.searchsorted(stream.t, starts, side="left")
    hi = np.searchsorted(stream.t, starts + w_us, side="left")
    return [stream.take(slice(a, b)) for a, b in zip(lo, hi)]


def window_slices(stream: EventStream, window_us: int) -> list[slice]:
    """Index slices of consecutive non-overlapping windows (stride == window)."""
    if len(stream) == 0:
        return []
    wins = window_bounds(int(stream.t[0]), stream.span, int(window_us), int(window_us))
    starts = np.array([w.t_start for w in wins], dtype=np.int64)
    edges = np.searchsorted(stream.t, np.append(starts, starts[-1] + window_us), side="left")
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


# ---------------------------------------------------------------------- I/O

def _detect_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "binary"


def read_stream(path, format: Optional[str] = None) -> EventStream:
    """Read an EVS1 binary or CSV event file."""
    path = Path(path)
    fmt = _detect_format(path, format)
    if fmt == "binary":
        return _read_binary(path.read_bytes())
    with open(path, newline="") as fh:
        return _read_csv(fh)


def write_stream(stream: EventStream, path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = _detect_format(path, format)
    try:
        if fmt == "binary":
            data = encode_binary(stream)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        else:
            with open(path, "w", newline="") as fh:
                _write_csv(stream, fh)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def encode_binary(stream: EventStream) -> bytes:
    header = np.zeros(1, dtype=HEADER)
    header[0] = (MAGIC, stream.width, stream.height, 1 if stream.labeled else 0)
    rec = np.empty(len(stream), dtype=RECORD_LABELED if stream.labeled else RECORD)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = (stream.p > 0).astype(np.uint8)
    if stream.labeled:
        rec["label"] = stream.label
    return header.tobytes() + rec.tobytes()


def _read_binary(data: bytes) -> EventStream:
    if len(data) < HEADER.itemsize:
        raise EventFormatError("truncated header", len(data))
    head = np.frombuffer(data, dtype=HEADER, count=1)[0]
    if head["magic"] != MAGIC:
        raise EventFormatError("bad magic", 0)
    flag = int(head["labeled"])
    if flag not in (0, 1):
        raise EventFormatError(f"bad label flag {flag}", 8)
    dt = RECORD_LABELED if flag else RECORD
    body = len(data) - HEADER.itemsize
    if body % dt.itemsize:
        last = HEADER.itemsize + (body // dt.itemsize) * dt.itemsize
        raise EventFormatError("truncated record", last)
    rec = np.frombuffer(data, dtype=dt, offset=HEADER.itemsize)
    n = len(rec)
    if n:
        bad = np.flatnonzero(rec["p"] > 1)
        if bad.size:
            raise EventFormatError("polarity byte not 0/1", HEADER.itemsize + bad[0] * dt.itemsize + 12)
        if flag:
            bad = np.flatnonzero(rec["label"] > 3)
            if bad.size:
                raise EventFormatError("label byte not 0..3", HEADER.itemsize + bad[0] * dt.itemsize + 13)
        if rec["t"].max() > np.iinfo(np.int64).max:
            raise EventFormatError("timestamp exceeds int64 range", HEADER.itemsize)
    t = rec["t"].astype(np.int64)
    p = np.where(rec["p"] == 1, 1, -1).astype(np.int8)
    lab = rec["label"].copy() if flag else None
    return EventStream(int(head["width"]), int(head["height"]), t,
                       rec["x"].astype(np.int32), rec["y"].astype(np.int32), p, lab)


def _write_csv(stream: EventStream, fh) -> None:
    fh.write(f"# width={stream.width} height={stream.height}\n")
    cols = ["t_us", "x", "y", "p"] + (["label"] if stream.labeled else [])
    fh.write(",".join(cols) + "\n")
    if not len(stream):
        return
    arr = [stream.t, stream.x, stream.y, (stream.p > 0).astype(np.int64)]
    if stream.labeled:
        arr.append(stream.label)
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(arr).astype(np.int64), fmt="%d", delimiter=",")
    fh.write(buf.getvalue())


def _read_csv(fh) -> EventStream:
    width = height = None
    header = None
    rows = []
    lineno = 0
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                if key in ("width", "height"):
                    try:
                        if key == "width":
                            width = int(val)
                        else:
                            height = int(val)
                    except ValueError:
                        raise EventFormatError(f"bad geometry comment {tok!r}", lineno) from None
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if header not in (["t_us", "x", "y", "p"], ["t_us", "x", "y", "p", "label"]):
                raise EventFormatError(f"unexpected header {line!r}", lineno)
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise EventFormatError(f"expected {len(header)} fields, got {len(parts)}", lineno)
        try:
            row = [int(v) for v in parts]
        except ValueError:
            raise EventFormatError(f"non-integer field in {line!r}", lineno) from None
        if row[3] not in (0, 1):
            raise EventFormatError(f"polarity {row[3]} not 0/1", lineno)
        if len(row) == 5 and not 0 <= row[4] <= 3:
            raise EventFormatError(f"label {row[4]} not in 0..3", lineno)
        rows.append(row)
    if header is None:
        raise EventFormatError("missing header", lineno)
    labeled = len(header) == 5
    arr = np.array(rows, dtype=np.int64).reshape(-1, len(header))
    if width is None or height is None:
        # no geometry comment: smallest sensor containing the events
        width = int(arr[:, 1].max()) + 1 if len(arr) else 1
        height = int(arr[:, 2].max()) + 1 if len(arr) else 1
    p = np.where(arr[:, 3] == 1, 1, -1)
    return EventStream(width, height, arr[:, 0], arr[:, 1], arr[:, 2], p,
                       arr[:, 4] if labeled else None)


def encode_mask(mask) -> bytes:
    """MSK1 + u64 count + bits packed LSB-first (event i is bit i % 8 of byte i // 8)."""
    mask = np.asarray(mask, dtype=bool).ravel()
    return MASK_MAGIC + np.uint64(mask.size).astype("<u8").tobytes() + np.packbits(mask, bitorder="little").tobytes()


def decode_mask(data: bytes) -> np.ndarray:
    if len(data) < 12 or data[:4] != MASK_MAGIC:
        raise EventFormatError("not a MSK1 mask file", 0)
    n = int(np.frombuffer(data, dtype="<u8", count=1, offset=4)[0])
    need = (n + 7) // 8
    if len(data) - 12 != need:
        raise EventFormatError(f"mask body has {len(data) - 12} bytes, expected {need}", 12)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=12), bitorder="little", count=n)
    return bits.astype(bool)


def write_mask(mask, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_mask(mask))
    os.replace(tmp, path)


def read_mask(path) -> np.ndarray:
    return decode_mask(Path(path).read_bytes())


def duration_seconds(stream: EventStream) -> float:
    return stream.span / US if len(stream) else 0.0


def n_windows(span_s: float, window_s: float, stride_s: float) -> int:
    """Number of windows ``slice_windows`` produces for a recording of ``span_s`` seconds."""
    if span_s <= 0:
        return 0
    return max(0, math.ceil(round((span_s - window_s) / stride_s, 9))) + 1
