"""Vehicle motion features and per-dataset vehicle means."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import DEFAULT_THRESHOLDS, Thresholds
from .kinematics import speed_series
from .pedfeat import FeatureError, mean_speed, stop_fraction, variability
from .trajstore import AgentKind, DatasetBundle, Track

VEHICLE_STOP_SPEED = 1.0
PARKED_MEAN_SPEED = 0.5

VEHICLE_COLUMNS = ("veh_mean_speed", "veh_stop_fraction", "veh_variability")


@dataclass(frozen=True)
class VehicleFeatures:
    agent_id: str
    scene_id: str
    dataset_id: str
    mean_speed: float
    stop_fraction: float
    variability: float


class Parked(NamedTuple):
    """Marker for a vehicle excluded as parked."""

    agent_id: str
    scene_id: str
    dataset_id: str
    mean_speed: float


class NoVehiclesError(FeatureError):
    """A dataset has no moving vehicle; exclude it from clustering."""


def vehicle_features(track: Track, stop_speed: float = VEHICLE_STOP_SPEED,
                     parked_speed: float = PARKED_MEAN_SPEED) -> VehicleFeatures | Parked:
    if track.kind is not AgentKind.VEHICLE:
        raise FeatureError(f"track {track.agent_id!r} is not a vehicle")
    ss = speed_series(track)
    v = mean_speed(ss)
    if v < parked_speed:
        return Parked(track.agent_id, track.scene_id, track.dataset_id, v)
    return VehicleFeatures(
        agent_id=track.agent_id,
        scene_id=track.scene_id,
        dataset_id=track.dataset_id,
        mean_speed=v,
        stop_fraction=stop_fraction(ss, stop_speed),
        variability=variability(ss),
    )


@dataclass(frozen=True)
class VehicleMeans:
    mean_speed: float
    stop_fraction: float
    variability: float
    n_vehicles: int

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.mean_speed, self.stop_fraction, self.variability)


def vehicle_means(features) -> VehicleMeans:
    """Unweighted means over moving vehicles; parked markers are ignored."""
    moving = [f for f in features if isinstance(f, VehicleFeatures)]
    if not moving:
        raise NoVehiclesError("no moving vehicle; exclude this dataset from clustering")
    arr = np.array([(f.mean_speed, f.stop_fraction, f.variability) for f in moving])
    m = arr.mean(axis=0)
    return VehicleMeans(float(m[0]), float(m[1]), float(m[2]), len(moving))


def all_vehicle_features(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS):
    return [
        vehicle_features(t, thresholds.veh_stop_speed, thresholds.parked_mean_speed)
        for t in bundle.tracks if t.kind is AgentKind.VEHICLE
    ]


def dataset_vehicle_means(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> dict[str, VehicleMeans]:
    """Vehicle means for every dataset of ``bundle``.

    Raises :class:`NoVehiclesError` if any dataset lacks moving vehicles;
    call per dataset (``bundle.subset``) to handle that case separately.
    """
    feats = all_vehicle_features(bundle, thresholds)
    out = {}
    for ds in bundle.dataset_ids:
        try:
            out[ds] = vehicle_means(f for f in feats if f.dataset_id == ds)
        except NoVehiclesError:
            raise NoVehiclesError(f"dataset {ds!r} has no moving vehicle; exclude it from clustering") from None
    return out
