"""Trajectory data model and CSV ingestion.

Every track lives in a world frame measured in meters.  Tracks are grouped
into scenes (one camera/recording) and scenes into datasets.  Three loaders
are provided:

* :func:`load_normalized` reads the package's own normalized CSV layout,
* :func:`adapt_sdd` reads Stanford-Drone-style ``annotations.txt`` files,
* :func:`adapt_generic` relabels any delimited file through a column map.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

log = logging.getLogger(__name__)

NORMALIZED_COLUMNS = ("dataset_id", "scene_id", "agent_id", "kind", "frame", "x_m", "y_m")


class TrajStoreError(ValueError):
    """Base class for ingestion and validation failures."""


class ParseError(TrajStoreError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class SceneReferenceError(TrajStoreError):
    """A track refers to a scene for which no metadata was supplied."""

    def __init__(self, scene_id: str):
        self.scene_id = scene_id
        super().__init__(f"no scene metadata for scene {scene_id!r}")


class ConfigError(TrajStoreError):
    """Adapter configuration is incomplete or inconsistent."""


class AgentKind(str, Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str) -> "AgentKind":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown agent kind {value!r}") from None


@dataclass(frozen=True)
class SceneMeta:
    scene_id: str
    dataset_id: str
    frame_rate_hz: float
    area_m2: float

    def __post_init__(self):
        if not (math.isfinite(self.frame_rate_hz) and self.frame_rate_hz > 0):
            raise TrajStoreError(f"scene {self.scene_id!r}: frame_rate_hz must be > 0")
        if not (math.isfinite(self.area_m2) and self.area_m2 > 0):
            raise TrajStoreError(f"scene {self.scene_id!r}: area_m2 must be > 0")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneMeta":
        try:
            return cls(
                scene_id=str(d["scene_id"]),
                dataset_id=str(d["dataset_id"]),
                frame_rate_hz=float(d["frame_rate_hz"]),
                area_m2=float(d["area_m2"]),
            )
        except KeyError as exc:
            raise ConfigError(f"scene metadata missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "dataset_id": self.dataset_id,
            "frame_rate_hz": self.frame_rate_hz,
            "area_m2": self.area_m2,
        }


def load_scene_meta(path) -> list[SceneMeta]:
    """Read scene metadata JSON: a single object or a list of objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if isinstance(raw, Mapping):
        raw = [raw]
    return [SceneMeta.from_dict(d) for d in raw]


def load_transform(path) -> np.ndarray:
    """Read a 3x3 homogeneous transform stored as 9 row-major numbers."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return as_transform(raw)


def as_transform(values) -> np.ndarray:
    h = np.asarray(values, dtype=float)
    if h.size != 9 or not np.all(np.isfinite(h)):
        raise ConfigError("transform must be 9 finite numbers (row-major 3x3)")
    return h.reshape(3, 3)


class TrackPoint(NamedTuple):
    frame_index: int
    time_s: float
    position: tuple[float, float]


@dataclass(frozen=True, eq=False)
class Track:
    """One agent's time-ordered positions within one scene.

    ``frames`` are integer frame indices, ``times`` the matching timestamps in
    seconds and ``positions`` an ``(n, 2)`` array of world coordinates.
    Frame gaps are allowed.
    """

    agent_id: str
    kind: AgentKind
    scene_id: str
    frames: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    dataset_id: str = ""

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.int64)
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if not (len(frames) == len(times) == len(pos)):
            raise TrajStoreError(f"track {self.agent_id!r}: frames/times/positions length mismatch")
        if len(frames) and frames.min() < 0:
            raise TrajStoreError(f"track {self.agent_id!r}: negative frame index")
        if np.any(np.diff(times) <= 0):
            raise TrajStoreError(f"track {self.agent_id!r}: timestamps must be strictly increasing")
        if not np.all(np.isfinite(pos)):
            raise TrajStoreError(f"track {self.agent_id!r}: non-finite position")
        for arr in (frames, times, pos):
            arr.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_frames(cls, agent_id, kind, scene: SceneMeta, frames, positions) -> "Track":
        frames = np.asarray(frames, dtype=np.int64)
        return cls(
            agent_id=str(agent_id),
            kind=kind,
            scene_id=scene.scene_id,
            frames=frames,
            times=frames / scene.frame_rate_hz,
            positions=positions,
            dataset_id=scene.dataset_id,
        )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.scene_id, self.agent_id)

    @property
    def points(self) -> list[TrackPoint]:
        return [
            TrackPoint(int(f), float(t), (float(p[0]), float(p[1])))
            for f, t, p in zip(self.frames, self.times, self.positions)
        ]


@dataclass(frozen=True)
class DatasetBundle:
    scenes: Mapping[str, SceneMeta]
    tracks: tuple[Track, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        scenes = dict(self.scenes)
        for tr in self.tracks:
            if tr.scene_id not in scenes:
                raise SceneReferenceError(tr.scene_id)
        object.__setattr__(self, "scenes", scenes)
        object.__setattr__(self, "tracks", tuple(self.tracks))

    @property
    def dataset_ids(self) -> list[str]:
        seen = dict.fromkeys(s.dataset_id for s in self.scenes.values())
        return list(seen)

    def scene_tracks(self, scene_id: str) -> list[Track]:
        return [t for t in self.tracks if t.scene_id == scene_id]

    def of_kind(self, kind: AgentKind) -> list[Track]:
        return [t for t in self.tracks if t.kind is kind]

    def subset(self, dataset_id: str) -> "DatasetBundle":
        scenes = {k: s for k, s in self.scenes.items() if s.dataset_id == dataset_id}
        return DatasetBundle(scenes, tuple(t for t in self.tracks if t.scene_id in scenes))

    @staticmethod
    def merge(bundles: Iterable["DatasetBundle"]) -> "DatasetBundle":
        scenes: dict[str, SceneMeta] = {}
        tracks: list[Track] = []
        warnings: list[str] = []
        for b in bundles:
            for k, s in b.scenes.items():
                if k in scenes and scenes[k] != s:
                    raise TrajStoreError(f"conflicting metadata for scene {k!r}")
                scenes[k] = s
            tracks.extend(b.tracks)
            warnings.extend(b.warnings)
        return DatasetBundle(scenes, tuple(tracks), tuple(warnings))


# --------------------------------------------------------------------------
# assembling tracks from flat rows


class _Row(NamedTuple):
    scene_id: str
    agent_id: str
    kind: AgentKind
    frame: int
    x: float
    y: float
    line: int


def _build_bundle(rows: Sequence[_Row], scenes: Mapping[str, SceneMeta], path=None) -> DatasetBundle:
    groups: dict[tuple[str, str], list[_Row]] = defaultdict(list)
    for r in rows:
        groups[(r.scene_id, r.agent_id)].append(r)

    tracks = []
    warnings = []
    for (scene_id, agent_id) in sorted(groups, key=lambda k: (k[0], _natural(k[1]))):
        if scene_id not in scenes:
            raise SceneReferenceError(scene_id)
        scene = scenes[scene_id]
        grp = sorted(groups[(scene_id, agent_id)], key=lambda r: r.frame)
        kinds = {r.kind for r in grp}
        if len(kinds) > 1:
            raise ParseError(f"agent {agent_id!r} has mixed kinds {sorted(k.value for k in kinds)}",
                             grp[-1].line, path)
        for a, b in zip(grp, grp[1:]):
            if a.frame == b.frame:
                line = max(a.line, b.line)
                raise ParseError(f"duplicate row for agent {agent_id!r} frame {b.frame}", line, path)
        if len(grp) < 2:
            msg = f"scene {scene_id!r} agent {agent_id!r}: single-point track discarded"
            log.warning(msg)
            warnings.append(msg)
            continue
        tracks.append(
            Track.from_frames(
                agent_id,
                grp[0].kind,
                scene,
                [r.frame for r in grp],
                [(r.x, r.y) for r in grp],
            )
        )
    return DatasetBundle(scenes, tuple(tracks), tuple(warnings))


def _natural(agent_id: str):
    # numeric ids sort numerically, everything else lexically after them
    try:
        return (0, int(agent_id), "")
    except ValueError:
        return (1, 0, agent_id)


def _finite(value: str, name: str, line: int, path) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"column {name!r}: not a number: {value!r}", line, path) from None
    if not math.isfinite(v):
        raise ParseError(f"column {name!r}: non-finite value {value!r}", line, path)
    return v


def _frame(value: str, line: int, path) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"frame is not a number: {value!r}", line, path) from None
    if f != int(f) or f < 0:
        raise ParseError(f"frame must be a non-negative integer: {value!r}", line, path)
    return int(f)


# --------------------------------------------------------------------------
# normalized CSV


def _scenes_mapping(scenes) -> dict[str, SceneMeta]:
    if scenes is None:
        return {}
    if isinstance(scenes, (str, Path)):
        scenes = load_scene_meta(scenes)
    elif isinstance(scenes, SceneMeta):
        scenes = [scenes]
    elif isinstance(scenes, Mapping):
        scenes = scenes.values()
    return {s.scene_id: s for s in scenes}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".scenes.json")


def load_normalized(path, scenes=None) -> DatasetBundle:
    """Load a normalized trajectory CSV.

    ``scenes`` may be a path to scene-metadata JSON, a sequence of
    :class:`SceneMeta`, or ``None`` to read the ``<stem>.scenes.json``
    sidecar written by :func:`write_normalized`.
    """
    path = Path(path)
    if scenes is None and sidecar_path(path).exists():
        scenes = sidecar_path(path)
    scene_map = _scenes_mapping(scenes)

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file (missing header)", 1, path)
        header = [h.strip() for h in header]
        if tuple(header) != NORMALIZED_COLUMNS:
            raise ParseError(f"header must be {','.join(NORMALIZED_COLUMNS)}", 1, path)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(NORMALIZED_COLUMNS):
                raise ParseError(f"expected {len(NORMALIZED_COLUMNS)} fields, got {len(rec)}", lineno, path)
            dataset_id, scene_id, agent_id, kind, frame, x, y = (c.strip() for c in rec)
            try:
                kind = AgentKind.parse(kind)
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            if scene_id in scene_map and scene_map[scene_id].dataset_id != dataset_id:
                raise ParseError(
                    f"scene {scene_id!r} belongs to dataset {scene_map[scene_id].dataset_id!r}, "
                    f"row says {dataset_id!r}", lineno, path)
            rows.append(_Row(scene_id, agent_id, kind, _frame(frame, lineno, path),
                             _finite(x, "x_m", lineno, path), _finite(y, "y_m", lineno, path), lineno))
    return _build_bundle(rows, scene_map, path)


def write_normalized(bundle: DatasetBundle, path, write_scenes: bool = True) -> None:
    """Write ``bundle`` as normalized CSV (plus the scene sidecar)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NORMALIZED_COLUMNS)
        for tr in bundle.tracks:
            ds = bundle.scenes[tr.scene_id].dataset_id
            for f, (x, y) in zip(tr.frames, tr.positions):
                w.writerow((ds, tr.scene_id, tr.agent_id, tr.kind.value, int(f), repr(float(x)), repr(float(y))))
    if write_scenes:
        with open(sidecar_path(path), "w", encoding="utf-8") as fh:
            json.dump([s.to_dict() for s in bundle.scenes.values()], fh, indent=2)
            fh.write("\n")


# --------------------------------------------------------------------------
# Stanford Drone Dataset

SDD_KINDS = {
    "Pedestrian": AgentKind.PEDESTRIAN,
    "Car": AgentKind.VEHICLE,
    "Cart": AgentKind.VEHICLE,
}
SDD_KNOWN_LABELS = {"Pedestrian", "Biker", "Skater", "Cart", "Car", "Bus"}


def apply_transform(h: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Map ``(n, 2)`` image points through a homogeneous 3x3 transform."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    homo = np.hstack([xy, np.ones((len(xy), 1))]) @ np.asarray(h, dtype=float).T
    w = homo[:, 2:3]
    if np.any(w == 0):
        raise TrajStoreError("transform maps a point to infinity")
    return homo[:, :2] / w


def adapt_sdd(path, meta: SceneMeta, transform) -> DatasetBundle:
    """Read an SDD ``annotations.txt`` file.

    Columns are ``track_id xmin ymin xmax ymax frame lost occluded generated
    "label"`` separated by whitespace.  Rows flagged ``lost`` are dropped, the
    bounding-box center is mapped through ``transform`` into meters.
    Pedestrians become pedestrians, cars and carts vehicles, every other label
    ``other``.  Labels outside the SDD vocabulary are counted as warnings.
    """
    h = as_transform(transform)
    raw = []
    unknown = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 10:
                raise ParseError(f"expected 10 fields, got {len(parts)}", lineno, path)
            tid, xmin, ymin, xmax, ymax, frame, lost = parts[:7]
            label = " ".join(parts[9:]).strip('"')
            if lost.strip() == "1":
                continue
            kind = SDD_KINDS.get(label, AgentKind.OTHER)
            if label not in SDD_KNOWN_LABELS:
                unknown += 1
            cx = (_finite(xmin, "xmin", lineno, path) + _finite(xmax, "xmax", lineno, path)) / 2
            cy = (_finite(ymin, "ymin", lineno, path) + _finite(ymax, "ymax", lineno, path)) / 2
            raw.append((tid, kind, _frame(frame, lineno, path), cx, cy, lineno))

    world = apply_transform(h, np.array([(r[3], r[4]) for r in raw])) if raw else np.empty((0, 2))
    rows = [
        _Row(meta.scene_id, tid, kind, frame, float(x), float(y), lineno)
        for (tid, kind, frame, _, _, lineno), (x, y) in zip(raw, world)
    ]
    bundle = _build_bundle(rows, {meta.scene_id: meta}, path)
    if unknown:
        msg = f"{path}: {unknown} rows with unknown labels recorded as 'other'"
        log.warning(msg)
        bundle = DatasetBundle(bundle.scenes, bundle.tracks, bundle.warnings + (msg,))
    return bundle


# --------------------------------------------------------------------------
# generic column-mapped files

REQUIRED_COLUMNS = ("id", "frame", "x", "y")

DEFAULT_KIND_MAP = {
    "pedestrian": AgentKind.PEDESTRIAN,
    "ped": AgentKind.PEDESTRIAN,
    "person": AgentKind.PEDESTRIAN,
    "car": AgentKind.VEHICLE,
    "cart": AgentKind.VEHICLE,
    "vehicle": AgentKind.VEHICLE,
    "van": AgentKind.VEHICLE,
    "truck": AgentKind.VEHICLE,
    "bus": AgentKind.VEHICLE,
    "truck_bus": AgentKind.VEHICLE,
}


def adapt_generic(
    path,
    column_map: Mapping[str, str],
    meta: SceneMeta,
    *,
    kind_map: Mapping[str, str | AgentKind] | None = None,
    default_kind: AgentKind = AgentKind.PEDESTRIAN,
    transform=None,
    delimiter: str = ",",
) -> DatasetBundle:
    """Load a delimited file whose columns are named by ``column_map``.

    ``column_map`` maps the roles ``id``, ``frame``, ``x``, ``y`` and
    optionally ``kind`` to source column names.  Kind values are matched
    case-insensitively against ``kind_map`` (default: common pedestrian and
    vehicle class names); unmatched values become ``other``.  Without a
    ``kind`` column every agent gets ``default_kind``.
    """
    missing = [c for c in REQUIRED_COLUMNS if not column_map.get(c)]
    if missing:
        raise ConfigError(f"column_map lacks required role(s): {', '.join(missing)}")
    kinds = {k.lower(): AgentKind(v) if not isinstance(v, AgentKind) else v
             for k, v in (kind_map or DEFAULT_KIND_MAP).items()}
    h = as_transform(transform) if transform is not None else None

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        absent = [src for role, src in column_map.items() if src and src not in header]
        if absent:
            raise ConfigError(f"{path}: mapped column(s) not in file: {', '.join(absent)}")
        kind_col = column_map.get("kind")
        for lineno, rec in enumerate(reader, start=2):
            kind = default_kind
            if kind_col:
                kind = kinds.get(rec[kind_col].strip().lower(), AgentKind.OTHER)
            rows.append(_Row(
                meta.scene_id,
                rec[column_map["id"]].strip(),
                kind,
                _frame(rec[column_map["frame"]], lineno, path),
                _finite(rec[column_map["x"]], column_map["x"], lineno, path),
                _finite(rec[column_map["y"]], column_map["y"], lineno, path),
                lineno,
            ))
    if h is not None and rows:
        world = apply_transform(h, np.array([(r.x, r.y) for r in rows]))
        rows = [r._replace(x=float(x), y=float(y)) for r, (x, y) in zip(rows, world)]
    return _build_bundle(rows, {meta.scene_id: meta}, path)
