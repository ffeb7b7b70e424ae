"""Seeded synthetic scenes with a known environment regime.

Two presets ship with the package: ``road`` (pedestrians keep to a few
directions, fast through-traffic that rarely yields) and ``campus``
(roaming pedestrians who often stop, slow vehicles that usually yield).
Positions are produced by integrating prescribed headings and speeds frame
by frame; nothing here reuses the feature code, so measured features can
be checked against the parameters that produced them.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from .trajstore import AgentKind, DatasetBundle, SceneMeta, Track


@dataclass(frozen=True)
class RegimeParams:
    name: str = "scene"
    # pedestrians
    ped_count: int = 30
    standing_count: int = 2
    ped_speed_mean: float = 1.3
    ped_speed_sd: float = 0.15
    speed_jitter: float = 0.08  # relative sd of the smooth per-frame speed noise
    stop_rate: float = 0.3  # expected stops per minute of walking
    stop_duration_s: float = 3.0
    allowed_directions: tuple[float, ...] | str = (0.0, 90.0, 180.0, 270.0)  # degrees, or "free"
    heading_dispersion: float = 0.05  # rad; spread around the chosen direction, 0 = exact
    heading_noise: float = 0.03  # rad; smooth per-frame wobble
    turn_rate: float = 0.5  # direction changes per minute
    ped_presence_s: tuple[float, float] = (20.0, 45.0)
    standing_presence_s: tuple[float, float] = (30.0, 90.0)
    # vehicles
    veh_count: int = 10
    veh_speed_mean: float = 8.0
    veh_speed_sd: float = 1.0
    veh_directions: tuple[float, ...] | str = (0.0, 180.0)
    veh_turn_rate: float = 0.0
    veh_stop_rate: float = 0.2
    veh_stop_duration_s: float = 3.0
    veh_presence_s: tuple[float, float] = (10.0, 20.0)
    # interactions
    yield_prob: float = 0.2  # chance that a planned crossing is won by the pedestrian
    encounter_fraction: float = 0.4  # share of walkers routed across a vehicle's path
    # scene
    area_m2: float = 1500.0
    frame_rate_hz: float = 10.0
    duration_s: float = 120.0
    seed: int = 0

    def __post_init__(self):
        positive = ("ped_speed_mean", "stop_duration_s", "veh_speed_mean", "veh_stop_duration_s",
                    "area_m2", "frame_rate_hz", "duration_s")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("stop_rate", "turn_rate", "veh_stop_rate", "veh_turn_rate", "speed_jitter",
                     "heading_dispersion", "heading_noise", "ped_speed_sd", "veh_speed_sd",
                     "ped_count", "standing_count", "veh_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("yield_prob", "encounter_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("allowed_directions", "veh_directions"):
            v = getattr(self, name)
            if isinstance(v, str):
                if v != "free":
                    raise ValueError(f"{name} must be a list of degrees or 'free'")
            else:
                object.__setattr__(self, name, tuple(float(a) for a in v))
        for name in ("ped_presence_s", "standing_presence_s", "veh_presence_s"):
            object.__setattr__(self, name, tuple(float(a) for a in getattr(self, name)))

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeParams":
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


PRESET_NAMES = ("road", "campus")


def load_preset(name: str, **overrides) -> RegimeParams:
    """Preset regime by name (``road`` or ``campus``), with field overrides."""
    name = name.lower()
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files("trajenv.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return replace(RegimeParams.from_dict(json.loads(text)), **overrides)


# --------------------------------------------------------------------------
# motion primitives


def _draw_heading(rng, directions, dispersion) -> float:
    if directions == "free":
        return float(rng.uniform(-math.pi, math.pi))
    base = math.radians(directions[rng.integers(len(directions))])
    if dispersion > 0:
        base += float(rng.vonmises(0.0, 1.0 / dispersion ** 2))
    return base


def _unit(theta: float) -> np.ndarray:
    # exact axis directions keep zero-dispersion headings on bin centres
    c, s = math.cos(theta), math.sin(theta)
    return np.array([round(c, 15) + 0.0, round(s, 15) + 0.0])


@dataclass
class _Mover:
    """Frame-by-frame walker with turns, stops and smooth speed/heading noise."""

    speed: float
    directions: tuple | str
    dispersion: float
    turn_rate: float  # per minute
    stop_rate: float  # per minute
    stop_duration: float
    jitter: float
    wobble: float
    min_speed: float
    rho: float = 0.95
    heading: float = 0.0
    _stop_left: float = 0.0
    _z_speed: float = 0.0
    _z_head: float = 0.0

    def run(self, rng, start: np.ndarray, n_steps: int, dt: float) -> np.ndarray:
        pos = np.empty((n_steps + 1, 2))
        pos[0] = start
        innov = math.sqrt(1 - self.rho ** 2)
        p_turn = 1 - math.exp(-self.turn_rate / 60.0 * dt)
        p_stop = 1 - math.exp(-self.stop_rate / 60.0 * dt)
        for k in range(n_steps):
            self._z_speed = self.rho * self._z_speed + innov * rng.standard_normal()
            self._z_head = self.rho * self._z_head + innov * rng.standard_normal()
            if self._stop_left > 0:
                self._stop_left -= dt
                pos[k + 1] = pos[k]
                continue
            if rng.random() < p_stop:
                self._stop_left = self.stop_duration * rng.uniform(0.5, 1.5)
                pos[k + 1] = pos[k]
                continue
            if rng.random() < p_turn:
                self.heading = _draw_heading(rng, self.directions, self.dispersion)
            v = max(self.min_speed, self.speed * (1 + self.jitter * self._z_speed))
            theta = self.heading + self.wobble * self._z_head
            pos[k + 1] = pos[k] + v * dt * _unit(theta)
        return pos


# --------------------------------------------------------------------------
# scene generation


def _frames_for(rng, presence, n_frames, dt):
    dur = rng.uniform(*presence)
    length = max(2, min(n_frames, int(round(dur / dt)) + 1))
    start = int(rng.integers(0, n_frames - length + 1))
    return start, length


def _vehicle_tracks(rng, p: RegimeParams, half: float, n_frames: int, dt: float):
    out = []
    for _ in range(p.veh_count):
        start, length = _frames_for(rng, p.veh_presence_s, n_frames, dt)
        speed = max(1.0, rng.normal(p.veh_speed_mean, p.veh_speed_sd))
        heading = _draw_heading(rng, p.veh_directions, 0.0)
        origin = rng.uniform(-half, half, size=2)
        if p.veh_directions != "free":
            # through traffic: enter upstream on a lane offset from the centre line
            d = _unit(heading)
            lane = np.array([-d[1], d[0]]) * 1.75
            origin = -d * half * rng.uniform(0.6, 1.0) + lane
        mover = _Mover(speed, p.veh_directions, 0.0, p.veh_turn_rate, p.veh_stop_rate,
                       p.veh_stop_duration_s, 0.05, 0.0, min_speed=0.3 * speed, heading=heading)
        pos = mover.run(rng, origin, length - 1, dt)
        out.append((start, pos))
    return out


def _plan_encounter(rng, p: RegimeParams, vehicles, n_frames, dt, speed):
    """Route a pedestrian across a vehicle's path; returns (t_cross, point, heading) or None."""
    for _ in range(50):
        start, pos = vehicles[rng.integers(len(vehicles))]
        vel = np.diff(pos, axis=0) / dt
        vspeed = np.hypot(*vel.T)
        if len(vspeed) < 4:
            continue
        k = int(rng.integers(1, len(vspeed) - 1))
        if vspeed[k] < 1.0 or vspeed[k - 1] < 1.0:
            continue
        lo, hi = max(0, k - int(3 / dt)), min(len(vspeed), k + int(3 / dt))
        v_local = float(vspeed[lo:hi].max())
        delta_max = 0.85 * 4.0 / (speed + v_local) - dt
        if delta_max < 0.05:
            continue
        delta = rng.uniform(0.3, 1.0) * delta_max
        # enough margin inside the vehicle's presence to observe the whole crossing
        margin = int(math.ceil((delta + 2 * dt) / dt)) + 1
        if k - margin < 0 or k + margin >= len(pos):
            continue
        t_veh = (start + k) * dt
        t_ped = t_veh - delta if rng.random() < p.yield_prob else t_veh + delta
        veh_heading = math.atan2(vel[k, 1], vel[k, 0])
        for _ in range(50):
            h = _draw_heading(rng, p.allowed_directions, p.heading_dispersion)
            if abs(math.sin(h - veh_heading)) > 0.5:
                return t_ped, pos[k].copy(), h
    return None


def generate(params: RegimeParams, scene_id: str | None = None, dataset_id: str | None = None) -> DatasetBundle:
    """One synthetic scene, fully determined by ``params`` (including its seed)."""
    p = params
    rng = np.random.default_rng(p.seed)
    dt = 1.0 / p.frame_rate_hz
    n_frames = int(round(p.duration_s * p.frame_rate_hz)) + 1
    half = math.sqrt(p.area_m2) / 2
    scene_id = scene_id or f"{p.name}-{p.seed:03d}"
    meta = SceneMeta(scene_id, dataset_id or scene_id, p.frame_rate_hz, p.area_m2)

    tracks = []
    vehicles = _vehicle_tracks(rng, p, half, n_frames, dt)
    for i, (start, pos) in enumerate(vehicles):
        tracks.append(Track.from_frames(f"v{i + 1:03d}", AgentKind.VEHICLE, meta,
                                        np.arange(start, start + len(pos)), pos))

    for i in range(p.ped_count):
        speed = max(0.8, rng.normal(p.ped_speed_mean, p.ped_speed_sd))
        mover = _Mover(speed, p.allowed_directions, p.heading_dispersion, p.turn_rate, p.stop_rate,
                       p.stop_duration_s, p.speed_jitter, p.heading_noise, min_speed=0.55)
        plan = None
        if vehicles and rng.random() < p.encounter_fraction:
            plan = _plan_encounter(rng, p, vehicles, n_frames, dt, speed)
        if plan is None:
            start, length = _frames_for(rng, p.ped_presence_s, n_frames, dt)
            mover.heading = _draw_heading(rng, p.allowed_directions, p.heading_dispersion)
            pos = mover.run(rng, rng.uniform(-half, half, size=2), length - 1, dt)
        else:
            t_cross, point, heading = plan
            before, after = rng.uniform(4.0, 10.0), rng.uniform(3.0, 6.0)
            first = max(0, int(math.ceil((t_cross - before) / dt)))
            last = min(n_frames - 1, int(math.floor((t_cross + after) / dt)))
            t = np.arange(first, last + 1) * dt
            straight = point + np.outer((t - t_cross) * speed, _unit(heading))
            extra = int(round(rng.uniform(0.0, 15.0) / dt))
            extra = min(extra, n_frames - 1 - last)
            mover.heading = heading
            tail = mover.run(rng, straight[-1], extra, dt)[1:]
            start = first
            pos = np.vstack([straight, tail])
        tracks.append(Track.from_frames(f"p{i + 1:03d}", AgentKind.PEDESTRIAN, meta,
                                        np.arange(start, start + len(pos)), pos))

    for i in range(p.standing_count):
        start, length = _frames_for(rng, p.standing_presence_s, n_frames, dt)
        anchor = rng.uniform(-half, half, size=2)
        pos = anchor + np.cumsum(rng.normal(0.0, 0.004, size=(length, 2)), axis=0)
        tracks.append(Track.from_frames(f"s{i + 1:03d}", AgentKind.PEDESTRIAN, meta,
                                        np.arange(start, start + length), pos))

    tracks.sort(key=lambda t: t.agent_id)
    return DatasetBundle({scene_id: meta}, tuple(tracks))


def generate_many(params: RegimeParams, seeds) -> DatasetBundle:
    """Independent scenes, one dataset each, for the given seeds."""
    return DatasetBundle.merge(generate(replace(params, seed=int(s))) for s in seeds)
