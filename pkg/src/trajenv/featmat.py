"""Thirteen-column feature matrix: assembly, IQR outlier removal, scaling."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .interact import INTERACTION_COLUMNS, InteractionFeatures
from .pedfeat import PedestrianFeatures
from .vehfeat import VEHICLE_COLUMNS, VehicleMeans

PEDESTRIAN_FEATURES = (
    "mean_speed",
    "stop_fraction",
    "variability",
    "path_efficiency",
    "orientation_entropy",
    "avg_density",
    "avg_standing_density",
)
FEATURE_COLUMNS = PEDESTRIAN_FEATURES + VEHICLE_COLUMNS + INTERACTION_COLUMNS
ID_COLUMNS = ("dataset_id", "scene_id", "agent_id")


class MatrixError(ValueError):
    pass


class FeatureRow(NamedTuple):
    dataset_id: str
    scene_id: str
    agent_id: str
    values: tuple


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    sd: np.ndarray
    q1: np.ndarray | None = None
    q3: np.ndarray | None = None

    def to_dict(self, columns) -> dict:
        out = {}
        for k, c in enumerate(columns):
            out[c] = {
                "mean": float(self.mean[k]),
                "sd": float(self.sd[k]),
                "q1": None if self.q1 is None else float(self.q1[k]),
                "q3": None if self.q3 is None else float(self.q3[k]),
            }
        return out

    @classmethod
    def from_dict(cls, d: dict, columns) -> "ColumnStats":
        def col(key):
            vals = [d[c][key] for c in columns]
            return None if any(v is None for v in vals) else np.array(vals, dtype=float)

        return cls(col("mean"), col("sd"), col("q1"), col("q3"))


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    dataset_ids: np.ndarray
    scene_ids: np.ndarray
    agent_ids: np.ndarray
    columns: tuple[str, ...] = FEATURE_COLUMNS
    column_stats: ColumnStats | None = None
    dropped: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1, len(self.columns))
        if not np.all(np.isfinite(v)):
            raise MatrixError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", v)
        for name in ("dataset_ids", "scene_ids", "agent_ids"):
            arr = np.asarray(getattr(self, name), dtype=object)
            if len(arr) != len(v):
                raise MatrixError(f"{name} length does not match row count")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self) -> int:
        return len(self.values)

    def rows(self):
        for d, s, a, v in zip(self.dataset_ids, self.scene_ids, self.agent_ids, self.values):
            yield FeatureRow(d, s, a, tuple(float(x) for x in v))

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, columns) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        stats = self.column_stats
        if stats is not None:
            stats = ColumnStats(*(None if a is None else a[idx] for a in
                                  (stats.mean, stats.sd, stats.q1, stats.q3)))
        return replace(self, values=self.values[:, idx], columns=tuple(columns), column_stats=stats)

    def take(self, mask) -> "FeatureMatrix":
        return replace(self, values=self.values[mask], dataset_ids=self.dataset_ids[mask],
                       scene_ids=self.scene_ids[mask], agent_ids=self.agent_ids[mask])

    # ---------------------------------------------------------------- io
    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ID_COLUMNS + self.columns)
            for r in self.rows():
                w.writerow((r.dataset_id, r.scene_id, r.agent_id) + tuple(repr(x) for x in r.values))

    def save(self, path) -> None:
        """CSV plus a ``.json`` sidecar holding column stats and dropped rows."""
        path = Path(path)
        self.to_csv(path)
        side = {
            "columns": list(self.columns),
            "column_stats": None if self.column_stats is None else self.column_stats.to_dict(self.columns),
            "dropped": [list(d) for d in self.dropped],
        }
        with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(side, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FeatureMatrix":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header[:3]) != ID_COLUMNS:
                raise MatrixError(f"{path}: header must start with {','.join(ID_COLUMNS)}")
            columns = tuple(header[3:])
            recs = list(reader)
        ids = [r[:3] for r in recs]
        vals = np.array([[float(x) for x in r[3:]] for r in recs], dtype=float).reshape(-1, len(columns))
        stats, dropped = None, ()
        side = path.with_suffix(".json")
        if side.exists():
            meta = json.loads(side.read_text(encoding="utf-8"))
            if meta.get("column_stats"):
                stats = ColumnStats.from_dict(meta["column_stats"], columns)
            dropped = tuple(tuple(d) for d in meta.get("dropped", []))
        return cls(vals, [i[0] for i in ids], [i[1] for i in ids], [i[2] for i in ids],
                   columns, stats, dropped)


@dataclass(frozen=True)
class DatasetLevel:
    """Dataset-wide values broadcast onto every pedestrian row."""

    orientation_entropy: float | None
    vehicles: VehicleMeans | None
    interaction: InteractionFeatures | None

    def missing(self) -> list[str]:
        out = []
        if self.orientation_entropy is None:
            out.append("orientation_entropy")
        if self.vehicles is None:
            out.append("vehicle features (no moving vehicle)")
        if self.interaction is None:
            out.append("interaction features")
        else:
            for name, v in zip(INTERACTION_COLUMNS, self.interaction.as_tuple()):
                if v is None:
                    out.append(name)
        return out


def assemble(pedestrians: list[PedestrianFeatures], dataset_level: dict[str, DatasetLevel]):
    """Build the matrix; returns ``(matrix, excluded)``.

    ``excluded`` maps each dataset lacking a dataset-level value to the list
    of missing features; its pedestrian rows are left out.
    """
    excluded: dict[str, list[str]] = {}
    vals, ids = [], []
    for p in pedestrians:
        lvl = dataset_level.get(p.dataset_id)
        missing = ["all dataset-level features"] if lvl is None else lvl.missing()
        if missing:
            excluded.setdefault(p.dataset_id, missing)
            continue
        vals.append((
            p.mean_speed, p.stop_fraction, p.variability, p.path_efficiency,
            lvl.orientation_entropy, p.avg_density, p.avg_standing_density,
            *lvl.vehicles.as_tuple(), *lvl.interaction.as_tuple(),
        ))
        ids.append((p.dataset_id, p.scene_id, p.agent_id))
    ids_arr = np.array(ids, dtype=object).reshape(-1, 3)
    m = FeatureMatrix(np.array(vals, dtype=float).reshape(-1, len(FEATURE_COLUMNS)),
                      ids_arr[:, 0], ids_arr[:, 1], ids_arr[:, 2])
    return m, excluded


def iqr_fences(values: np.ndarray, factor: float = 1.5):
    """Per-column ``(q1, q3, low, high)`` with linear-interpolation quantiles."""
    q1, q3 = np.percentile(values, [25, 75], axis=0, method="linear")
    iqr = q3 - q1
    return q1, q3, q1 - factor * iqr, q3 + factor * iqr


def remove_outliers(matrix: FeatureMatrix, factor: float = 1.5, per_dataset: bool = False) -> FeatureMatrix:
    """Drop every row with any entry outside its column's IQR fences.

    One pass; fences come from the combined matrix, or from each dataset's
    own rows when ``per_dataset`` is set.
    """
    if len(matrix) < 4:
        raise MatrixError("outlier removal needs at least 4 rows")
    keep = np.ones(len(matrix), dtype=bool)
    groups = [np.ones(len(matrix), dtype=bool)]
    if per_dataset:
        groups = [matrix.dataset_ids == d for d in dict.fromkeys(matrix.dataset_ids)]
    for g in groups:
        v = matrix.values[g]
        _, _, low, high = iqr_fences(v, factor)
        keep[g] &= np.all((v >= low) & (v <= high), axis=1)
    if not keep.any():
        raise MatrixError("outlier removal dropped every row")
    q1, q3, _, _ = iqr_fences(matrix.values, factor)
    dropped = tuple(
        (matrix.dataset_ids[i], matrix.scene_ids[i], matrix.agent_ids[i]) for i in np.flatnonzero(~keep)
    )
    out = matrix.take(keep)
    stats = ColumnStats(out.values.mean(axis=0), _sd(out.values), q1, q3)
    return replace(out, column_stats=stats, dropped=matrix.dropped + dropped)


def _sd(values: np.ndarray) -> np.ndarray:
    if len(values) < 2:
        return np.zeros(values.shape[1])
    return values.std(axis=0, ddof=1)


def column_stats(matrix: FeatureMatrix) -> ColumnStats:
    old = matrix.column_stats
    return ColumnStats(matrix.values.mean(axis=0), _sd(matrix.values),
                       None if old is None else old.q1, None if old is None else old.q3)


def apply_standardization(matrix: FeatureMatrix, stats: ColumnStats) -> np.ndarray:
    """z-scores of ``matrix`` under ``stats``; zero-sd columns map to 0."""
    sd = np.where(stats.sd > 0, stats.sd, 1.0)
    z = (matrix.values - stats.mean) / sd
    z[:, stats.sd == 0] = 0.0
    return z


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Column z-scores with the sample (n-1) standard deviation.

    The input's statistics are kept in ``column_stats`` so new data can be
    put on the same scale.
    """
    if len(matrix) < 2:
        raise MatrixError("standardization needs at least 2 rows")
    stats = column_stats(matrix)
    return replace(matrix, values=apply_standardization(matrix, stats), column_stats=stats)


def center(matrix: FeatureMatrix) -> FeatureMatrix:
    if len(matrix) < 2:
        raise MatrixError("centering needs at least 2 rows")
    stats = column_stats(matrix)
    return replace(matrix, values=matrix.values - stats.mean, column_stats=stats)
