"""Per-pedestrian motion features.

Speed-profile features (mean speed, stop fraction, variability) are computed
from forward-difference speeds.  Path efficiency and path orientation work on
4.8 s trajlets.  Densities are averaged over the frames in which the subject
pedestrian is present.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_THRESHOLDS, Thresholds
from .kinematics import (
    SpeedSeries,
    Trajlet,
    endpoint_distance,
    heading_angle,
    path_length,
    point_speeds,
    speed_series,
    split_trajlets,
)
from .trajstore import AgentKind, DatasetBundle, SceneMeta, Track

PEDESTRIAN_STOP_SPEED = 0.5
STATIONARY_STOP_FRACTION = 0.9


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class PedestrianFeatures:
    agent_id: str
    scene_id: str
    dataset_id: str
    mean_speed: float
    stop_fraction: float
    variability: float
    path_efficiency: float
    avg_density: float
    avg_standing_density: float


PEDESTRIAN_COLUMNS = (
    "mean_speed",
    "stop_fraction",
    "variability",
    "path_efficiency",
    "avg_density",
    "avg_standing_density",
)


def _speeds(ss) -> np.ndarray:
    s = ss.speeds if isinstance(ss, SpeedSeries) else np.asarray(ss, dtype=float)
    if s.size == 0:
        raise FeatureError("empty speed series")
    return s


def mean_speed(ss) -> float:
    return float(np.mean(_speeds(ss)))


def stop_fraction(ss, threshold: float = PEDESTRIAN_STOP_SPEED) -> float:
    """Fraction of samples strictly slower than ``threshold``."""
    s = _speeds(ss)
    return float(np.count_nonzero(s < threshold)) / s.size


def variability(ss) -> float:
    """Trace of the speed covariance: the population variance of the speeds."""
    s = _speeds(ss)
    return float(np.mean((s - s.mean()) ** 2))


def is_stationary(ss, threshold: float = PEDESTRIAN_STOP_SPEED,
                  max_stop_fraction: float = STATIONARY_STOP_FRACTION) -> bool:
    return stop_fraction(ss, threshold) > max_stop_fraction


def path_efficiency(track_or_trajlets, window_s: float = 4.8) -> float:
    """Summed trajlet endpoint distances over summed trajlet path lengths.

    A track that never moves has efficiency 1.0 by convention.
    """
    trajlets = track_or_trajlets
    if isinstance(trajlets, Track):
        trajlets = split_trajlets(trajlets, window_s)
    disp = sum(endpoint_distance(t.positions) for t in trajlets)
    length = sum(path_length(t.positions) for t in trajlets)
    if length == 0:
        return 1.0
    return disp / length


@dataclass(frozen=True)
class OrientationDistribution:
    bin_counts: np.ndarray
    total: int

    @property
    def bin_edges_deg(self) -> np.ndarray:
        return np.linspace(-180.0, 180.0, len(self.bin_counts) + 1)


def orientation_histogram(headings, bins: int = 36) -> OrientationDistribution:
    """Histogram of headings (radians, ``[-pi, pi)``) in equal bins over the circle."""
    h = np.asarray([a for a in headings if a is not None], dtype=float)
    idx = np.floor((h + math.pi) / (2 * math.pi) * bins).astype(int)
    # pi itself (and rounding just below it) wraps onto the -pi bin
    idx = np.mod(idx, bins)
    counts = np.bincount(idx, minlength=bins)
    return OrientationDistribution(counts, int(counts.sum()))


def entropy(counts) -> float:
    """Shannon entropy (nats) of a histogram, empty bins ignored."""
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    if c.size == 0:
        raise FeatureError("entropy of an empty histogram")
    p = c / c.sum()
    return float(-(p * np.log(p)).sum()) + 0.0  # no negative zero


def trajlet_headings(trajlets) -> list[float | None]:
    return [heading_angle(t.positions) for t in trajlets]


def orientation_entropy(trajlets_or_headings, bins: int = 36) -> float:
    """Entropy of trajlet heading directions.

    Accepts :class:`Trajlet` objects or raw heading angles.  Trajlets without
    a defined heading are skipped.
    """
    items = list(trajlets_or_headings)
    headings = [heading_angle(t.positions) if isinstance(t, Trajlet) else t for t in items]
    dist = orientation_histogram(headings, bins)
    if dist.total == 0:
        raise FeatureError("no trajlet with a defined heading")
    return entropy(dist.bin_counts)


class SceneOccupancy:
    """Per-frame pedestrian and standing-pedestrian counts of one scene."""

    def __init__(self, scene: SceneMeta, tracks, standing_speed: float = PEDESTRIAN_STOP_SPEED):
        self.scene = scene
        peds = [t for t in tracks if t.kind is AgentKind.PEDESTRIAN and t.scene_id == scene.scene_id]
        n_frames = max((int(t.frames[-1]) for t in peds), default=-1) + 1
        present = np.zeros(n_frames, dtype=np.int64)
        standing = np.zeros(n_frames, dtype=np.int64)
        for t in peds:
            present[t.frames] += 1
            standing[t.frames] += point_speeds(t) < standing_speed
        self.present = present
        self.standing = standing

    def density_features(self, track: Track) -> tuple[float, float]:
        f = track.frames
        area = self.scene.area_m2
        return (float(self.present[f].mean()) / area, float(self.standing[f].mean()) / area)


def density_features(track: Track, scene_tracks, scene: SceneMeta,
                     standing_speed: float = PEDESTRIAN_STOP_SPEED) -> tuple[float, float]:
    """(average density, average standing density) while ``track`` is present.

    Builds the occupancy index on each call; use :class:`SceneOccupancy`
    directly when evaluating many pedestrians of one scene.
    """
    return SceneOccupancy(scene, scene_tracks, standing_speed).density_features(track)


@dataclass
class PedestrianResult:
    """Pedestrian features of a bundle.

    ``orientation_entropy`` maps dataset id to the dataset-level value (or
    ``None`` when no trajlet has a defined heading).
    """

    features: list[PedestrianFeatures]
    stationary: list[tuple[str, str]]
    orientation_entropy: dict[str, float | None]
    trajlet_headings: dict[str, list[float]]


def pedestrian_features(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> PedestrianResult:
    feats = []
    stationary = []
    headings: dict[str, list[float]] = {ds: [] for ds in bundle.dataset_ids}
    for scene_id, scene in bundle.scenes.items():
        tracks = bundle.scene_tracks(scene_id)
        occ = SceneOccupancy(scene, tracks, thresholds.ped_stop_speed)
        for tr in tracks:
            if tr.kind is not AgentKind.PEDESTRIAN:
                continue
            ss = speed_series(tr)
            if is_stationary(ss, thresholds.ped_stop_speed, thresholds.stationary_stop_fraction):
                stationary.append((scene_id, tr.agent_id))
                continue
            trajlets = split_trajlets(tr, thresholds.trajlet_seconds)
            headings[scene.dataset_id].extend(
                a for a in trajlet_headings(trajlets) if a is not None)
            dens, stand = occ.density_features(tr)
            feats.append(PedestrianFeatures(
                agent_id=tr.agent_id,
                scene_id=scene_id,
                dataset_id=scene.dataset_id,
                mean_speed=mean_speed(ss),
                stop_fraction=stop_fraction(ss, thresholds.ped_stop_speed),
                variability=variability(ss),
                path_efficiency=path_efficiency(trajlets),
                avg_density=dens,
                avg_standing_density=stand,
            ))
    ent = {
        ds: (orientation_entropy(h, thresholds.orientation_bins) if h else None)
        for ds, h in headings.items()
    }
    return PedestrianResult(feats, stationary, ent, headings)
