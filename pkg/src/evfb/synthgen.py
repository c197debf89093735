"""Seeded synthetic telescope-scan scenes with per-event ground truth.

A scene is the sum of four independent Poisson processes:

* stars: point sources drifting at ``-field_velocity`` (label 3)
* satellites: point sources with their own velocities (label 1)
* hot pixels: fixed pixels firing at a high constant rate (label 2)
* background activity: uniform over the sensor (label 0)

Object events get 1 px Gaussian jitter around the moving point.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .evstream import US, EventStream, Label


class ConfigError(ValueError):
    pass


@dataclass
class SceneConfig:
    width: int = 1280
    height: int = 720
    duration: float = 30.0
    field_velocity: tuple = (-20.0, 5.0)
    n_stars: int = 40
    star_rate_range: tuple = (10.0, 120.0)
    n_satellites: int = 2
    # None -> random velocities whose x component opposes the star drift
    satellite_velocities: Optional[list] = None
    satellite_speed_range: tuple = (40.0, 90.0)
    satellite_rate: float = 150.0
    background_rate: float = 0.01
    n_hot_pixels: int = 200
    hot_rate_range: tuple = (1.0, 20.0)
    jitter: float = 1.0
    glint_depth: float = 0.0
    glint_frequency: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.field_velocity = tuple(float(v) for v in self.field_velocity)
        self.star_rate_range = tuple(float(v) for v in self.star_rate_range)
        self.hot_rate_range = tuple(float(v) for v in self.hot_rate_range)
        self.satellite_speed_range = tuple(float(v) for v in self.satellite_speed_range)
        if self.satellite_velocities is not None:
            self.satellite_velocities = [tuple(float(c) for c in v) for v in self.satellite_velocities]

    def validate(self) -> None:
        for name in ("n_stars", "n_satellites", "n_hot_pixels"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("background_rate", "satellite_rate", "jitter", "glint_depth"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("star_rate_range", "hot_rate_range", "satellite_speed_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} must satisfy 0 <= lo <= hi")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("geometry must be positive")
        if self.n_hot_pixels > self.width * self.height:
            raise ConfigError("more hot pixels than sensor pixels")
        if (self.n_stars or self.n_satellites) and min(self.width, self.height) < 8:
            raise ConfigError("geometry too small for star/satellite trajectories")
        if self.satellite_velocities is not None and len(self.satellite_velocities) != self.n_satellites:
            raise ConfigError("satellite_velocities must have one entry per satellite")
        if self.glint_depth > 1:
            raise ConfigError("glint_depth must be in [0, 1]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SceneConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Track:
    """A point source moving at constant velocity: position(t) = start + velocity * t."""
    start: tuple
    velocity: tuple
    rate: float
    label: int

    def position(self, t_s):
        return (self.start[0] + self.velocity[0] * t_s, self.start[1] + self.velocity[1] * t_s)


@dataclass
class SceneTruth:
    stars: list = field(default_factory=list)
    satellites: list = field(default_factory=list)
    hot_pixels: list = field(default_factory=list)  # (x, y, rate)

    @property
    def star_velocity(self):
        return self.stars[0].velocity if self.stars else None


def _poisson_times(rng, rate, duration):
    n = rng.poisson(rate * duration)
    return np.sort(rng.random(n) * duration)


def _track_events(rng, track: Track, cfg: SceneConfig, glint_phase: float):
    # thinning a rate-`rate` process over the whole scan keeps counts Poisson
    ts = _poisson_times(rng, track.rate, cfg.duration)
    if track.label == Label.SATELLITE and cfg.glint_depth > 0 and ts.size:
        keep_p = (1 + cfg.glint_depth * np.sin(2 * np.pi * cfg.glint_frequency * ts + glint_phase)) / (1 + cfg.glint_depth)
        ts = ts[rng.random(ts.size) < keep_p]
    n = ts.size
    vx, vy = track.velocity
    speed = math.hypot(vx, vy)
    # leading edge brightens (+1), trailing edge darkens (-1)
    pol = np.where(rng.random(n) < 0.5, 1, -1)
    along = 0.5 * pol if speed > 0 else np.zeros(n)
    ux, uy = (vx / speed, vy / speed) if speed > 0 else (0.0, 0.0)
    xs = track.start[0] + vx * ts + along * ux + rng.normal(0, cfg.jitter, n)
    ys = track.start[1] + vy * ts + along * uy + rng.normal(0, cfg.jitter, n)
    xi = np.rint(xs).astype(np.int64)
    yi = np.rint(ys).astype(np.int64)
    ok = (xi >= 0) & (xi < cfg.width) & (yi >= 0) & (yi < cfg.height)
    return ts[ok], xi[ok], yi[ok], pol[ok]


def _place_stars(rng, cfg: SceneConfig):
    vx, vy = -cfg.field_velocity[0], -cfg.field_velocity[1]
    # spawn region: every point that passes through the sensor during the scan
    x0 = min(0.0, -vx * cfg.duration)
    x1 = max(float(cfg.width), cfg.width - vx * cfg.duration)
    y0 = min(0.0, -vy * cfg.duration)
    y1 = max(float(cfg.height), cfg.height - vy * cfg.duration)
    lo, hi = cfg.star_rate_range
    stars = []
    for _ in range(cfg.n_stars):
        start = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        stars.append(Track(start, (vx, vy), rng.uniform(lo, hi), int(Label.STAR)))
    return stars


def _place_satellites(rng, cfg: SceneConfig):
    star_vx = -cfg.field_velocity[0]
    sats = []
    for i in range(cfg.n_satellites):
        if cfg.satellite_velocities is not None:
            vel = cfg.satellite_velocities[i]
        else:
            speed = rng.uniform(*cfg.satellite_speed_range)
            ang = rng.uniform(-0.6, 0.6)
            sign = -1.0 if star_vx >= 0 else 1.0
            vel = (sign * speed * math.cos(ang), speed * math.sin(ang))
        # cross a point in the central half of the sensor at a random time
        tc = rng.uniform(0.3, 0.7) * cfg.duration
        cx = rng.uniform(0.25, 0.75) * cfg.width
        cy = rng.uniform(0.25, 0.75) * cfg.height
        start = (cx - vel[0] * tc, cy - vel[1] * tc)
        sats.append(Track(start, tuple(vel), cfg.satellite_rate, int(Label.SATELLITE)))
    return sats


def generate_scene_with_truth(cfg: SceneConfig) -> tuple[EventStream, SceneTruth]:
    """Generate a labeled scene and the object tracks that produced it."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    truth = SceneTruth(stars=_place_stars(rng, cfg), satellites=_place_satellites(rng, cfg))

    cols = []  # (t_s, x, y, p, label)
    for tr in truth.stars + truth.satellites:
        t, x, y, p = _track_events(rng, tr, cfg, rng.uniform(0, 2 * np.pi))
        cols.append((t, x, y, p, np.full(t.size, tr.label)))

    if cfg.n_hot_pixels:
        flat = rng.choice(cfg.width * cfg.height, size=cfg.n_hot_pixels, replace=False)
        rates = rng.uniform(*cfg.hot_rate_range, size=cfg.n_hot_pixels)
        for f, r in zip(flat, rates):
            hx, hy = int(f % cfg.width), int(f // cfg.width)
            truth.hot_pixels.append((hx, hy, float(r)))
            t = _poisson_times(rng, r, cfg.duration)
            cols.append((t, np.full(t.size, hx), np.full(t.size, hy),
                         rng.choice([-1, 1], size=t.size), np.full(t.size, int(Label.HOT_PIXEL))))

    if cfg.background_rate > 0:
        n = rng.poisson(cfg.background_rate * cfg.width * cfg.height * cfg.duration)
        t = rng.random(n) * cfg.duration
        cols.append((t, rng.integers(0, cfg.width, n), rng.integers(0, cfg.height, n),
                     rng.choice([-1, 1], size=n), np.zeros(n, dtype=np.int64)))

    if not cols:
        return EventStream.empty(cfg.width, cfg.height, labeled=True), truth
    t_s, x, y, p, lab = (np.concatenate(c) for c in zip(*cols))
    t_us = np.minimum(np.floor(t_s * US), cfg.duration * US - 1).astype(np.int64)
    order = np.argsort(t_us, kind="stable")
    stream = EventStream(cfg.width, cfg.height, t_us[order], x[order], y[order],
                         p[order], lab[order])
    return stream, truth


def generate_scene(cfg: SceneConfig) -> EventStream:
    return generate_scene_with_truth(cfg)[0]


def benchmark_configs(n_scenes: int = 10, seed: int = 0, **overrides) -> list[SceneConfig]:
    """Scene configs for the desk-scale benchmark; one derived seed per scene."""
    seeds = np.random.SeedSequence(seed).generate_state(n_scenes, dtype=np.uint64)
    return [SceneConfig(seed=int(s), **overrides) for s in seeds]
