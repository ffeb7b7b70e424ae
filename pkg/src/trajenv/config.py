"""Analysis thresholds and run configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class Thresholds:
    ped_stop_speed: float = 0.5  # m/s, pedestrian counts as stopped below this
    veh_stop_speed: float = 1.0  # m/s
    parked_mean_speed: float = 0.5  # m/s, vehicles slower on average are parked
    stationary_stop_fraction: float = 0.9  # pedestrians stopped more than this are stationary
    interaction_distance: float = 4.0  # m
    trajlet_seconds: float = 4.8
    orientation_bins: int = 36
    approach_bins: int = 18
    iqr_factor: float = 1.5

    @classmethod
    def from_dict(cls, d: dict | None) -> "Thresholds":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown threshold(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def overrides(self) -> dict:
        """Entries that differ from the defaults."""
        default = Thresholds()
        return {k: v for k, v in asdict(self).items() if getattr(default, k) != v}


DEFAULT_THRESHOLDS = Thresholds()
