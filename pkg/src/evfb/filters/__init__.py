"""Logic-based denoisers behind one interface: ``run_filter(name, stream, params) -> keep mask``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..evstream import EventStream, window_slices
from .crossconv import crossconv, noise_map, neighbour_max
from .streaming import dwf, evflow, fwf, iets, knoise, stcf, stdf, ts_filter, ynoise


class UnknownFilterError(KeyError):
    pass


@dataclass(frozen=True)
class Sweep:
    param: str
    lo: float
    hi: float
    steps: int
    log: bool = True
    integer: bool = False

    def __post_init__(self):
        if self.steps < 2 or not self.hi > self.lo:
            raise ValueError("sweep needs steps >= 2 and hi > lo")

    def values(self) -> list:
        if self.log:
            v = np.geomspace(self.lo, self.hi, self.steps)
        else:
            v = np.linspace(self.lo, self.hi, self.steps)
        if self.integer:
            v = np.unique(np.rint(v))
        return [float(a) for a in v]


@dataclass(frozen=True)
class FilterSpec:
    name: str
    fn: Callable
    defaults: dict
    sweep: Sweep
    # keep-set grows as the swept parameter grows
    monotone: bool = False
    batch: bool = False

    def params(self, **overrides) -> dict:
        p = dict(self.defaults)
        unknown = set(overrides) - set(p)
        if unknown:
            raise ValueError(f"{self.name}: unknown parameters {sorted(unknown)}")
        p.update(overrides)
        return p


REGISTRY: dict[str, FilterSpec] = {}


def _register(spec: FilterSpec):
    REGISTRY[spec.name] = spec


_register(FilterSpec("knoise", knoise, {"delta": 1e6}, Sweep("delta", 1e2, 1e7, 16), monotone=True))
_register(FilterSpec("fwf", fwf, {"distance_threshold": 4.0, "L": 175},
                     Sweep("distance_threshold", 0, 60, 16, log=False, integer=True), monotone=True))
_register(FilterSpec("dwf", dwf, {"distance_threshold": 4.0, "L": 175, "signal_only": False, "promote": False},
                     Sweep("distance_threshold", 0, 60, 16, log=False, integer=True)))
_register(FilterSpec("stdf", stdf, {"duration": 1e5, "correlation": 3},
                     Sweep("duration", 1e3, 1e7, 16), monotone=True))
_register(FilterSpec("ts", ts_filter, {"time_threshold": 1e5, "decay": 1e6, "radius": 5},
                     Sweep("time_threshold", 1e2, 1e7, 16), monotone=True))
_register(FilterSpec("evflow", evflow, {"duration": 1e5, "radius": 1, "flow_threshold": 1e5},
                     Sweep("duration", 1e3, 1e7, 16)))
_register(FilterSpec("ynoise", ynoise, {"duration": 1e5, "radius": 5, "density_threshold": 2},
                     Sweep("duration", 1e3, 1e7, 16), monotone=True))
_register(FilterSpec("iets", iets, {"window_size": 1e4},
                     Sweep("window_size", 1e2, 1e7, 16)))
_register(FilterSpec("stcf", stcf, {"tau": 1e5, "k": 4}, Sweep("tau", 1e3, 1e7, 16), monotone=True))
_register(FilterSpec("crossconv", crossconv, {"threshold": 2.0, "window": None},
                     Sweep("threshold", 0.1, 100.0, 19), monotone=True, batch=True))

LOGICAL = tuple(REGISTRY)


def get_filter(name: str) -> FilterSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownFilterError(f"unknown filter {name!r}; registered: {', '.join(REGISTRY)}") from None


def run_filter(name: str, stream: EventStream, params: Optional[dict] = None,
               window_us: Optional[int] = None) -> np.ndarray:
    """Keep mask aligned with ``stream``.

    With ``window_us`` the stream is cut into consecutive windows, each
    filtered from a fresh state, and the masks are concatenated.
    """
    spec = get_filter(name)
    p = spec.params(**(params or {}))
    if window_us is None:
        mask = spec.fn(stream, **p)
    else:
        mask = np.zeros(len(stream), dtype=bool)
        for sl in window_slices(stream, int(window_us)):
            mask[sl] = spec.fn(stream.take(sl), **p)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(stream),):
        raise RuntimeError(f"{name} returned a mask of shape {mask.shape} for {len(stream)} events")
    return mask


__all__ = [
    "REGISTRY", "LOGICAL", "FilterSpec", "Sweep", "UnknownFilterError", "get_filter", "run_filter",
    "crossconv", "noise_map", "neighbour_max", "knoise", "fwf", "dwf", "stcf", "stdf",
    "ts_filter", "evflow", "ynoise", "iets",
]
