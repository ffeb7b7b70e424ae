"""Velocity, trajlet and path-geometry primitives."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajstore import Track

TRAJLET_SECONDS = 4.8
_TIME_EPS = 1e-9


class KinematicsError(ValueError):
    pass


@dataclass(frozen=True)
class SpeedSeries:
    """Forward-difference speeds; ``times[i]`` is the leading point's time."""

    times: np.ndarray
    speeds: np.ndarray

    @property
    def n(self) -> int:
        return len(self.speeds)

    def __len__(self) -> int:
        return len(self.speeds)


def speeds_from(positions, times) -> np.ndarray:
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float)
    if len(positions) < 2:
        raise KinematicsError("need at least 2 points for a speed")
    dt = np.diff(times)
    if np.any(dt <= 0):
        raise KinematicsError("timestamps must be strictly increasing")
    # divide by actual elapsed time so dropped frames are handled
    return np.hypot(*np.diff(positions, axis=0).T) / dt


def speed_series(track: Track) -> SpeedSeries:
    return SpeedSeries(times=np.asarray(track.times[:-1]), speeds=speeds_from(track.positions, track.times))


def point_speeds(track: Track) -> np.ndarray:
    """Instantaneous speed at every point of ``track``.

    Points use their forward-difference speed; the final point reuses the
    last segment's speed since it has no successor.
    """
    s = speeds_from(track.positions, track.times)
    return np.append(s, s[-1])


@dataclass(frozen=True)
class Trajlet:
    parent: Track
    start: int
    stop: int  # inclusive index of the last point

    @property
    def positions(self) -> np.ndarray:
        return self.parent.positions[self.start:self.stop + 1]

    @property
    def times(self) -> np.ndarray:
        return self.parent.times[self.start:self.stop + 1]

    @property
    def frames(self) -> np.ndarray:
        return self.parent.frames[self.start:self.stop + 1]

    @property
    def duration(self) -> float:
        return float(self.parent.times[self.stop] - self.parent.times[self.start])

    def __len__(self) -> int:
        return self.stop - self.start + 1


def split_trajlets(track: Track, window_s: float = TRAJLET_SECONDS) -> list[Trajlet]:
    """Cut ``track`` greedily into consecutive windows of at most ``window_s``.

    Neighbouring trajlets share their boundary point, so summed trajlet path
    lengths equal the full path length.  A trailing remainder is its own
    trajlet.  A single frame gap longer than the window yields a two-point
    trajlet that exceeds ``window_s``.
    """
    if len(track) < 2:
        raise KinematicsError("need at least 2 points to split")
    t = track.times
    last = len(t) - 1
    out = []
    i = 0
    while i < last:
        j = int(np.searchsorted(t, t[i] + window_s + _TIME_EPS, side="right")) - 1
        j = max(j, i + 1)
        out.append(Trajlet(track, i, j))
        i = j
    return out


def path_length(points) -> float:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        raise KinematicsError("need at least 2 points")
    return float(np.hypot(*np.diff(p, axis=0).T).sum())


def endpoint_distance(points) -> float:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        raise KinematicsError("need at least 2 points")
    return float(math.hypot(*(p[-1] - p[0])))


def heading_angle(points) -> float | None:
    """Direction of the first-to-last displacement in ``[-pi, pi)``.

    Returns ``None`` for zero displacement.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    dx, dy = p[-1] - p[0]
    if dx == 0 and dy == 0:
        return None
    a = math.atan2(dy, dx)
    if a >= math.pi:
        a = -math.pi
    return a
