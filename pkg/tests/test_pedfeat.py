import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajenv.kinematics import split_trajlets
from trajenv.pedfeat import (
    FeatureError,
    SceneOccupancy,
    density_features,
    entropy,
    is_stationary,
    mean_speed,
    orientation_entropy,
    orientation_histogram,
    path_efficiency,
    pedestrian_features,
    stop_fraction,
    variability,
)
from trajenv.trajstore import AgentKind

from conftest import bundle, line, scene, track


@pytest.mark.parametrize("speeds, expected", [([1, 1, 1], 1.0), ([0, 2], 1.0), ([0.5, 1.5, 2.5], 1.5)])
def test_mean_speed(speeds, expected):
    assert mean_speed(speeds) == pytest.approx(expected)


def test_empty_series_rejected():
    with pytest.raises(FeatureError):
        mean_speed([])


def test_stop_fraction_examples():
    assert stop_fraction([0.3, 0.3, 0.7, 0.7], 0.5) == 0.5
    assert stop_fraction([0.5, 0.9], 0.5) == 0.0
    assert stop_fraction([0.1, 0.49], 0.5) == 1.0


def test_variability_examples():
    assert variability([2.0] * 7) == 0.0
    assert variability([1, 2, 3]) == pytest.approx(2 / 3)


def brute_variability(s):
    # two explicit loops: the mean, then the mean squared deviation
    n = len(s)
    mu = 0.0
    for v in s:
        mu += v
    mu /= n
    acc = 0.0
    for v in s:
        acc += (v - mu) * (v - mu)
    return acc / n


def test_variability_matches_brute_force(rng):
    for _ in range(200):
        s = rng.gamma(2.0, 0.7, size=rng.integers(1, 300))
        assert abs(variability(s) - brute_variability(list(s))) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=50), st.floats(0.01, 100))
def test_variability_quadratic_homogeneity(s, alpha):
    s = np.array(s)
    assert variability(alpha * s) == pytest.approx(alpha ** 2 * variability(s), rel=1e-9, abs=1e-9)


def test_is_stationary_boundary():
    assert is_stationary([0.0] * 19 + [1.0])
    assert not is_stationary([0.0] * 9 + [1.0])
    assert not is_stationary([0.0] + [1.0] * 9)


# ----------------------------------------------------------------- efficiency


def test_straight_track_efficiency():
    assert path_efficiency(track(line((0, 0), (1.3, 0.2), 100))) == pytest.approx(1.0)


def test_right_angle_efficiency():
    tr = track([(0, 0), (3, 0), (3, 4)], meta=scene(rate=1.0))
    assert path_efficiency(tr) == pytest.approx(5 / 7)


def test_efficiency_ratio_of_sums():
    # two 2 s trajlets, each an L with efficiency 5/7
    pts = [(0, 0), (3, 0), (3, 4), (6, 4), (6, 8)]
    tr = track(pts, meta=scene(rate=1.0))
    tl = split_trajlets(tr, 2.0)
    assert len(tl) == 2
    assert path_efficiency(tl) == pytest.approx(5 / 7)


def test_unequal_trajlets_use_sums_not_mean():
    pts = [(0, 0), (1, 0), (1, 1), (11, 1), (21, 1)]
    tl = split_trajlets(track(pts, meta=scene(rate=1.0)), 2.0)
    disp = math.sqrt(2) + 20
    assert path_efficiency(tl) == pytest.approx(disp / 22)


def test_motionless_efficiency_is_one():
    assert path_efficiency(track([(1, 1)] * 10)) == 1.0


def test_efficiency_bounds(rng):
    for _ in range(50):
        tr = track(np.cumsum(rng.normal(size=(80, 2)), axis=0))
        assert 0 < path_efficiency(tr) <= 1 + 1e-12


# ----------------------------------------------------------------- entropy


def test_entropy_one_bin():
    assert orientation_entropy([0.1, 0.11, 0.12]) == 0.0


def test_entropy_uniform_36():
    centers = -math.pi + (np.arange(36) + 0.5) * (2 * math.pi / 36)
    assert orientation_entropy(centers) == pytest.approx(math.log(36), abs=1e-12)


def test_entropy_two_bins():
    assert entropy([2, 2]) == pytest.approx(math.log(2))
    assert orientation_entropy([0.0, 0.0, math.pi / 2, math.pi / 2]) == pytest.approx(math.log(2))


def test_entropy_requires_headings():
    with pytest.raises(FeatureError):
        orientation_entropy([None, None])


def test_histogram_wraps_pi():
    d = orientation_histogram([math.pi, -math.pi])
    assert d.bin_counts[0] == 2


def test_entropy_invariant_under_bin_rotation(rng):
    h = rng.uniform(-math.pi, math.pi, 500)
    base = orientation_entropy(h)
    for k in (1, 5, 17):
        rot = np.mod(h + k * math.radians(10) + math.pi, 2 * math.pi) - math.pi
        assert orientation_entropy(rot) == pytest.approx(base, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-math.pi, math.pi, exclude_max=True), min_size=1, max_size=200))
def test_entropy_bounds(h):
    e = orientation_entropy(h)
    assert 0 <= e <= math.log(36) + 1e-12


# ----------------------------------------------------------------- density


def test_lone_pedestrian_density():
    tr = track(line((0, 0), (1, 0), 30))
    assert density_features(tr, [tr], scene()) == (0.01, 0.0)


def test_standing_companion_density():
    meta = scene(area=50.0)
    subj = track(line((0, 0), (1, 0), 30), "a", meta=meta)
    still = track([(5, 5)] * 30, "b", meta=meta)
    d, s = density_features(subj, [subj, still], meta)
    assert d == pytest.approx(0.04) and s == pytest.approx(0.02)


def brute_density(subject, tracks, area, threshold=0.5):
    dens, stand = [], []
    for f in subject.frames:
        n = k = 0
        for t in tracks:
            if t.kind is not AgentKind.PEDESTRIAN:
                continue
            idx = np.flatnonzero(t.frames == f)
            if idx.size == 0:
                continue
            n += 1
            i = int(idx[0])
            # forward difference; the last point reuses the final segment
            a, b = (i, i + 1) if i + 1 < len(t) else (i - 1, i)
            v = np.linalg.norm(t.positions[b] - t.positions[a]) / (t.times[b] - t.times[a])
            k += v < threshold
        dens.append(n / area)
        stand.append(k / area)
    return float(np.mean(dens)), float(np.mean(stand))


def test_density_matches_frame_oracle(rng):
    meta = scene(area=80.0)
    subj = track(np.cumsum(rng.normal(0, 0.1, (40, 2)), axis=0), "s", meta=meta, start_frame=10)
    others = []
    for i in range(3):
        start = 10 + 20 * (i % 2)
        pos = np.cumsum(rng.normal(0, 0.04, (20, 2)), axis=0)
        others.append(track(pos, f"o{i}", meta=meta, start_frame=start))
    veh = track(line((0, 0), (5, 0), 50), "v", AgentKind.VEHICLE, meta)
    tracks = [subj, *others, veh]
    got = density_features(subj, tracks, meta)
    want = brute_density(subj, tracks, meta.area_m2)
    assert got == pytest.approx(want, abs=1e-12)


def rigid(tracks, theta, shift):
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    out = []
    for t in tracks:
        out.append(track(t.positions @ R.T + shift, t.agent_id, t.kind, scene(), frames=t.frames))
    return out


def random_scene(rng, n=6, length=120):
    tracks = []
    for i in range(n):
        steps = rng.normal(0, 0.12, (length, 2)) + rng.normal(0, 0.1, 2)
        tracks.append(track(np.cumsum(steps, axis=0), f"p{i}", start_frame=int(rng.integers(0, 40))))
    return tracks


def feature_tuple(res):
    return [(f.mean_speed, f.stop_fraction, f.variability, f.path_efficiency, f.avg_density,
             f.avg_standing_density) for f in res.features]


def test_features_rigid_invariant(rng):
    tracks = random_scene(rng)
    a = pedestrian_features(bundle(tracks))
    b = pedestrian_features(bundle(rigid(tracks, 0.7, (13.0, -4.0))))
    np.testing.assert_allclose(feature_tuple(a), feature_tuple(b), rtol=1e-9, atol=1e-12)


def test_orientation_entropy_rotation_by_bin_width(rng):
    tracks = random_scene(rng, n=10)
    a = pedestrian_features(bundle(tracks)).orientation_entropy["d1"]
    b = pedestrian_features(bundle(rigid(tracks, math.radians(30), (0, 0)))).orientation_entropy["d1"]
    assert a == pytest.approx(b, abs=1e-12)


def test_stationary_counted_in_density_but_no_row():
    meta = scene(area=50.0)
    subj = track(line((0, 0), (1, 0), 30), "a", meta=meta)
    still = track([(5, 5)] * 30, "b", meta=meta)
    res = pedestrian_features(bundle([subj, still], [meta]))
    assert [f.agent_id for f in res.features] == ["a"]
    assert res.stationary == [("s1", "b")]
    assert res.features[0].avg_density == pytest.approx(0.04)


def test_scene_occupancy_shared_index():
    tr = track(line((0, 0), (1, 0), 30))
    occ = SceneOccupancy(scene(), [tr])
    assert occ.present.sum() == 30 and occ.standing.sum() == 0
