"""Pedestrian-vehicle interaction episodes and interaction features.

An interaction event is a maximal run of frames in which a pedestrian and a
vehicle are both annotated and closer than the proximity threshold (4 m by
default).  Candidate pairs are found by hashing positions into grid cells as
wide as the threshold, which returns exactly the pairs a full all-pairs scan
would.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_THRESHOLDS, Thresholds
from .pedfeat import FeatureError, entropy
from .trajstore import AgentKind, DatasetBundle, Track

INTERACTION_DISTANCE = 4.0
PEDESTRIAN_FIRST = "pedestrian_first"
VEHICLE_FIRST = "vehicle_first"

INTERACTION_COLUMNS = ("approach_entropy", "priority_ratio", "v2p_ratio")
EVENT_CSV_COLUMNS = ("scene_id", "ped_id", "veh_id", "first_frame", "last_frame",
                     "approach_angle_deg", "crossing", "winner")


@dataclass(frozen=True)
class Crossing:
    intersection_point: tuple[float, float]
    ped_cross_time: float
    veh_cross_time: float

    @property
    def winner(self) -> str:
        # exact ties go to the vehicle
        return PEDESTRIAN_FIRST if self.ped_cross_time < self.veh_cross_time else VEHICLE_FIRST


@dataclass
class InteractionEvent:
    scene_id: str
    dataset_id: str
    ped_id: str
    veh_id: str
    first_frame: int
    last_frame: int
    frames: np.ndarray = field(repr=False)
    approach_angle: float | None = None
    crossing: Crossing | None = None

    @property
    def sort_key(self):
        return (self.scene_id, self.ped_id, self.veh_id, self.first_frame)


# --------------------------------------------------------------------------
# pair detection


def _rows(tracks):
    frames = np.concatenate([t.frames for t in tracks]) if tracks else np.empty(0, np.int64)
    owner = np.concatenate([np.full(len(t), i) for i, t in enumerate(tracks)]) if tracks else np.empty(0, np.int64)
    pos = np.concatenate([t.positions for t in tracks]) if tracks else np.empty((0, 2))
    return frames, owner, pos


def _near_pairs(peds, vehs, threshold):
    """All (frame, ped index, veh index) triples with distance below ``threshold``."""
    pf, po, pp = _rows(peds)
    vf, vo, vp = _rows(vehs)
    if len(pf) == 0 or len(vf) == 0:
        return np.empty((0, 3), np.int64)
    pc = np.floor(pp / threshold).astype(np.int64)
    vc = np.floor(vp / threshold).astype(np.int64)
    lo = np.minimum(pc.min(axis=0), vc.min(axis=0)) - 1
    span = np.maximum(pc.max(axis=0), vc.max(axis=0)) + 2 - lo

    def encode(frames, cells):
        c = cells - lo
        return (frames * span[1] + c[:, 1]) * span[0] + c[:, 0]

    vkey = encode(vf, vc)
    order = np.argsort(vkey, kind="stable")
    vkey = vkey[order]

    found = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            key = encode(pf, pc + (dx, dy))
            left = np.searchsorted(vkey, key, side="left")
            right = np.searchsorted(vkey, key, side="right")
            counts = right - left
            total = counts.sum()
            if total == 0:
                continue
            prow = np.repeat(np.arange(len(pf)), counts)
            starts = np.repeat(left - np.cumsum(counts) + counts, counts)
            vrow = order[starts + np.arange(total)]
            d = np.hypot(*(pp[prow] - vp[vrow]).T)
            keep = d < threshold
            found.append(np.column_stack([pf[prow[keep]], po[prow[keep]], vo[vrow[keep]]]))
    if not found:
        return np.empty((0, 3), np.int64)
    return np.concatenate(found)


def _has_common_frame_between(a: np.ndarray, b: np.ndarray, lo: int, hi: int) -> bool:
    """Whether sorted frame arrays ``a`` and ``b`` share a frame in ``(lo, hi)``."""
    a = a[np.searchsorted(a, lo, "right"):np.searchsorted(a, hi, "left")]
    b = b[np.searchsorted(b, lo, "right"):np.searchsorted(b, hi, "left")]
    return bool(np.intersect1d(a, b, assume_unique=True).size)


def find_interactions(bundle: DatasetBundle, threshold: float = INTERACTION_DISTANCE,
                      annotate: bool = True) -> list[InteractionEvent]:
    """Detect pedestrian-vehicle proximity episodes in every scene.

    Two near frames belong to the same event when no frame in which both
    agents are annotated lies between them.  With ``annotate`` the approach
    angle and crossing outcome are filled in.
    """
    events = []
    for scene_id, scene in bundle.scenes.items():
        tracks = bundle.scene_tracks(scene_id)
        peds = [t for t in tracks if t.kind is AgentKind.PEDESTRIAN]
        vehs = [t for t in tracks if t.kind is AgentKind.VEHICLE]
        near = _near_pairs(peds, vehs, threshold)
        if len(near) == 0:
            continue
        near = near[np.lexsort((near[:, 0], near[:, 2], near[:, 1]))]
        pair_change = np.flatnonzero(np.any(np.diff(near[:, 1:], axis=0) != 0, axis=1)) + 1
        for grp in np.split(near, pair_change):
            ped, veh = peds[grp[0, 1]], vehs[grp[0, 2]]
            frames = grp[:, 0]
            cuts = [
                i + 1 for i in np.flatnonzero(np.diff(frames) > 1)
                if _has_common_frame_between(ped.frames, veh.frames, frames[i], frames[i + 1])
            ]
            for run in np.split(frames, cuts):
                ev = InteractionEvent(scene_id, scene.dataset_id, ped.agent_id, veh.agent_id,
                                      int(run[0]), int(run[-1]), run)
                if annotate:
                    ev.approach_angle = approach_angle(ev, ped, veh)
                    ev.crossing = crossing_priority(ev, ped, veh)
                events.append(ev)
    events.sort(key=lambda e: (e.scene_id, _id_key(e.ped_id), _id_key(e.veh_id), e.first_frame))
    return events


def _id_key(agent_id):
    try:
        return (0, int(agent_id), "")
    except ValueError:
        return (1, 0, agent_id)


# --------------------------------------------------------------------------
# approach angle


def _position_at(track: Track, frame: int) -> np.ndarray:
    i = int(np.searchsorted(track.frames, frame))
    if i >= len(track) or track.frames[i] != frame:
        raise FeatureError(f"agent {track.agent_id!r} not annotated at frame {frame}")
    return track.positions[i]


def angle_between(u, v) -> float | None:
    """Unsigned angle in degrees between two displacement vectors."""
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0 or nv == 0:
        return None
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def approach_angle(event: InteractionEvent, ped: Track, veh: Track) -> float | None:
    """Angle between the agents' first-to-last displacements over the event.

    ``None`` when either agent does not move during the event.
    """
    dp = _position_at(ped, event.last_frame) - _position_at(ped, event.first_frame)
    dv = _position_at(veh, event.last_frame) - _position_at(veh, event.first_frame)
    return angle_between(dp, dv)


def approach_histogram(angles, bins: int = 18) -> np.ndarray:
    a = np.asarray([x for x in angles if x is not None], dtype=float)
    idx = np.minimum(np.floor(a / (180.0 / bins)).astype(int), bins - 1)
    return np.bincount(idx, minlength=bins)


def approach_entropy(events_or_angles, bins: int = 18) -> float:
    items = list(events_or_angles)
    angles = [e.approach_angle if isinstance(e, InteractionEvent) else e for e in items]
    counts = approach_histogram(angles, bins)
    if counts.sum() == 0:
        raise FeatureError("no event with a defined approach angle")
    return entropy(counts)


# --------------------------------------------------------------------------
# crossing priority


def _span(track: Track, first: int, last: int):
    lo = np.searchsorted(track.frames, first, "left")
    hi = np.searchsorted(track.frames, last, "right")
    return track.positions[lo:hi], track.times[lo:hi]


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def segment_intersections(p_pts, q_pts):
    """Intersections between every segment of polyline ``p`` and of ``q``.

    Returns arrays ``(i, s, j, u)``: segment ``i`` of ``p`` at parameter ``s``
    meets segment ``j`` of ``q`` at parameter ``u`` (both in ``[0, 1]``).
    Parallel and degenerate segments never intersect.
    """
    p_pts = np.asarray(p_pts, dtype=float)
    q_pts = np.asarray(q_pts, dtype=float)
    if len(p_pts) < 2 or len(q_pts) < 2:
        e = np.empty(0)
        return e.astype(int), e, e.astype(int), e
    p0, r = p_pts[:-1, None, :], np.diff(p_pts, axis=0)[:, None, :]
    q0, s = q_pts[None, :-1, :], np.diff(q_pts, axis=0)[None, :, :]
    denom = _cross2(r, s)
    qp = q0 - p0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross2(qp, s) / denom
        u = _cross2(qp, r) / denom
    hit = (denom != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    i, j = np.nonzero(hit)
    return i, t[i, j], j, u[i, j]


def crossing_priority(event: InteractionEvent, ped: Track, veh: Track) -> Crossing | None:
    """Who reached the intersection of the two paths first during ``event``.

    Both polylines are restricted to the event's frame span.  When they cross
    more than once the earliest pedestrian arrival is used.
    """
    pp, pt = _span(ped, event.first_frame, event.last_frame)
    vp, vt = _span(veh, event.first_frame, event.last_frame)
    i, s, j, u = segment_intersections(pp, vp)
    if len(i) == 0:
        return None
    ped_t = pt[i] + s * (pt[i + 1] - pt[i])
    veh_t = vt[j] + u * (vt[j + 1] - vt[j])
    k = np.lexsort((veh_t, ped_t))[0]
    point = pp[i[k]] + s[k] * (pp[i[k] + 1] - pp[i[k]])
    return Crossing((float(point[0]), float(point[1])), float(ped_t[k]), float(veh_t[k]))


def priority_ratio(events) -> float | None:
    """Share of crossings won by the pedestrian; ``None`` without crossings."""
    crossings = [e.crossing for e in events if e.crossing is not None]
    if not crossings:
        return None
    return sum(c.winner == PEDESTRIAN_FIRST for c in crossings) / len(crossings)


# --------------------------------------------------------------------------
# vehicle-to-pedestrian ratio


def v2p_ratio(bundle: DatasetBundle) -> float:
    """Mean over frames with a pedestrian of (#vehicles / #pedestrians).

    Frames are taken per scene; frames without pedestrians are skipped.
    """
    ratios = []
    for scene_id in bundle.scenes:
        tracks = bundle.scene_tracks(scene_id)
        peds = [t.frames for t in tracks if t.kind is AgentKind.PEDESTRIAN]
        vehs = [t.frames for t in tracks if t.kind is AgentKind.VEHICLE]
        if not peds:
            continue
        n = int(max(f[-1] for f in peds + vehs)) + 1
        n_ped = np.bincount(np.concatenate(peds), minlength=n)
        n_veh = np.bincount(np.concatenate(vehs), minlength=n) if vehs else np.zeros(n, np.int64)
        has = n_ped > 0
        ratios.append(n_veh[has] / n_ped[has])
    if not ratios:
        raise FeatureError("no frame contains a pedestrian")
    return float(np.concatenate(ratios).mean())


# --------------------------------------------------------------------------
# per-dataset features


@dataclass(frozen=True)
class InteractionFeatures:
    approach_entropy: float | None
    priority_ratio: float | None
    v2p_ratio: float | None
    n_events: int
    n_crossings: int

    @property
    def complete(self) -> bool:
        return None not in (self.approach_entropy, self.priority_ratio, self.v2p_ratio)

    def as_tuple(self):
        return (self.approach_entropy, self.priority_ratio, self.v2p_ratio)


def interaction_features(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                         events=None):
    """Per-dataset interaction features; returns ``(features, events)``.

    Undefined quantities (no angles, no crossings, no pedestrians) are
    ``None``.
    """
    if events is None:
        events = find_interactions(bundle, thresholds.interaction_distance)
    out = {}
    for ds in bundle.dataset_ids:
        evs = [e for e in events if e.dataset_id == ds]
        angles = [e.approach_angle for e in evs if e.approach_angle is not None]
        sub = bundle.subset(ds)
        try:
            v2p = v2p_ratio(sub)
        except FeatureError:
            v2p = None
        out[ds] = InteractionFeatures(
            approach_entropy=approach_entropy(angles, thresholds.approach_bins) if angles else None,
            priority_ratio=priority_ratio(evs),
            v2p_ratio=v2p,
            n_events=len(evs),
            n_crossings=sum(e.crossing is not None for e in evs),
        )
    return out, events


def write_events_csv(events, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_CSV_COLUMNS)
        for e in events:
            w.writerow((
                e.scene_id, e.ped_id, e.veh_id, e.first_frame, e.last_frame,
                "" if e.approach_angle is None else repr(e.approach_angle),
                int(e.crossing is not None),
                "" if e.crossing is None else e.crossing.winner,
            ))
