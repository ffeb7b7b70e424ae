"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""
import math
import time

import numpy as np
import pytest

from trajenv import glmfit, pipeline, synthgen
from trajenv.cluster import kmeans
from trajenv.featmat import PEDESTRIAN_FEATURES
from trajenv.interact import approach_entropy, crossing_priority, find_interactions
from trajenv.pedfeat import orientation_entropy, variability
from trajenv.trajstore import AgentKind, DatasetBundle, SceneMeta, Track

from oracles import crossing_oracle, events_oracle, exhaustive_kmeans, loglik, newton_logit, span


def direct_variability(speeds):
    # explicit summation: mean of squared deviations from the mean
    n = len(speeds)
    mean = sum(speeds) / n
    return sum((s - mean) * (s - mean) for s in speeds) / n


def test_1_variability_equivalence(report):
    rng = np.random.default_rng(1)
    series = [rng.gamma(2.0, 0.6, int(rng.integers(2, 501))) for _ in range(1000)]
    t0 = time.perf_counter()
    worst = max(abs(variability(s) - direct_variability(s.tolist())) for s in series)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    report("1 variability vs direct summation", ok, f"max err {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_2_kmeans_optimality(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = -np.inf
    for _ in range(100):
        n = int(rng.integers(2, 13))
        X = rng.normal(size=(n, 13)) * rng.uniform(0.1, 5.0, 13)
        if rng.random() < 0.5:
            X[: n // 2] += rng.normal(0, 3, 13)
        worst = max(worst, kmeans(X, seed=0).inertia - exhaustive_kmeans(X))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30.0
    report("2 k-means inertia <= exhaustive best", ok, f"max excess {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_3_irls_correctness(report):
    rng = np.random.default_rng(3)
    coef_err = score_max = fd_max = 0.0
    for _ in range(50):
        p = int(rng.integers(2, 5))
        X = rng.normal(size=(200, p))
        beta = rng.uniform(-1.5, 1.5, p + 1)
        y = (rng.random(200) < 1 / (1 + np.exp(-(beta[0] + X @ beta[1:])))).astype(float)
        fit = glmfit.irls_fit(X, y)
        ref, _ = newton_logit(X, y)
        coef_err = max(coef_err, float(np.max(np.abs(fit.coefficients - ref))))
        score_max = max(score_max, fit.score_max)
        Z = np.column_stack([np.ones(200), X])
        analytic = Z.T @ (y - 1 / (1 + np.exp(-(Z @ fit.coefficients))))
        h = 1e-5
        for j in range(p + 1):
            e = np.zeros(p + 1)
            e[j] = h
            fd = (loglik(Z, y, fit.coefficients + e) - loglik(Z, y, fit.coefficients - e)) / (2 * h)
            fd_max = max(fd_max, abs(fd - analytic[j]))
    ok = coef_err <= 1e-6 and score_max < 1e-8 and fd_max <= 1e-5
    report("3 IRLS vs Newton oracle", ok,
           f"coef err {coef_err:.1e}, score {score_max:.1e}, fd grad {fd_max:.1e}")
    assert ok


def test_4_entropy_bounds(report):
    rng = np.random.default_rng(4)
    lo_o, hi_o, lo_a, hi_a = np.inf, -np.inf, np.inf, -np.inf
    for _ in range(500):
        n = int(rng.integers(1, 400))
        if rng.random() < 0.3:
            h = rng.vonmises(rng.uniform(-3, 3), rng.uniform(0.5, 50), n)
        else:
            h = rng.uniform(-math.pi, math.pi, n)
        h = np.mod(h + math.pi, 2 * math.pi) - math.pi
        e = orientation_entropy(h)
        lo_o, hi_o = min(lo_o, e), max(hi_o, e)
        a = approach_entropy(rng.uniform(0, 180, n))
        lo_a, hi_a = min(lo_a, a), max(hi_a, a)
    centres36 = -math.pi + (np.arange(36) + 0.5) * (2 * math.pi / 36)
    centres18 = (np.arange(18) + 0.5) * 10.0
    u36 = abs(orientation_entropy(np.repeat(centres36, 7)) - math.log(36))
    u18 = abs(approach_entropy(np.repeat(centres18, 3)) - math.log(18))
    ok = (lo_o >= 0 and hi_o <= math.log(36) and lo_a >= 0 and hi_a <= math.log(18)
          and u36 <= 1e-12 and u18 <= 1e-12)
    report("4 entropy bounds", ok,
           f"orientation [{lo_o:.3f}, {hi_o:.4f}], approach [{lo_a:.3f}, {hi_a:.4f}], "
           f"uniform err {max(u36, u18):.1e}")
    assert ok


@pytest.fixture(scope="module")
def presets_run():
    t0 = time.perf_counter()
    bundle = DatasetBundle.merge([
        synthgen.generate_many(synthgen.load_preset("road"), range(10)),
        synthgen.generate_many(synthgen.load_preset("campus"), range(100, 110)),
    ])
    result = pipeline.analyze(bundle, seed=0)
    return result, time.perf_counter() - t0


def test_5_end_to_end_separation(report, presets_run):
    result, elapsed = presets_run
    rep = result.report
    purity = {s: max(f.values()) for s, f in rep.scene_fractions.items()}
    campus = [s for s in purity if s.startswith("campus")]
    road = [s for s in purity if s.startswith("road")]
    means = {}
    for name in ("stop_fraction", "variability", "path_efficiency"):
        col = result.clean.column(name)
        means[name] = {c: float(col[result.labels == c].mean()) for c in ("A", "B")}
    ok = (len(campus) == 10 and len(road) == 10
          and min(purity.values()) >= 0.95
          and all(rep.scene_majority[s] == "A" for s in campus)
          and all(rep.scene_majority[s] == "B" for s in road)
          and means["stop_fraction"]["A"] > means["stop_fraction"]["B"]
          and means["variability"]["A"] > means["variability"]["B"]
          and means["path_efficiency"]["A"] < means["path_efficiency"]["B"]
          and elapsed < 120)
    report("5 synthetic road/campus separation", ok,
           f"min purity {min(purity.values()):.3f}, campus->A, "
           + ", ".join(f"{k} A {v['A']:.4g} vs B {v['B']:.4g}" for k, v in means.items())
           + f", {elapsed:.1f} s")
    assert ok


def best_with(candidates, feature):
    fits = [c.fit for c in candidates if c.fit is not None and feature in c.subset]
    return min(fits, key=lambda f: f.aic) if fits else None


def test_6_glm_structure(report, presets_run):
    result, _ = presets_run
    campus_var = result.clean.column("variability")[result.labels == "A"].mean()
    road_var = result.clean.column("variability")[result.labels == "B"].mean()
    assert campus_var > road_var, "campus regime must be constructed with higher variability"
    signs, aic_ok, n_fits = {}, True, 0
    for positive in ("A", "B"):
        X, y = pipeline.glm_inputs(result.clean, result.labels, positive)
        _, cands = glmfit.enumerate_fits(X, y, PEDESTRIAN_FEATURES, positive_label=positive)
        for c in cands:
            if c.fit is not None:
                n_fits += 1
                aic_ok &= c.fit.aic == 2 * c.fit.n_params - 2 * c.fit.log_likelihood
        fit = best_with(cands, "variability")
        signs[positive] = None if fit is None else math.copysign(1, fit.coef("variability"))
    # higher variability in campus (cluster A): the coefficient is negative
    # exactly when campus is coded 0, i.e. y = 1 for the structured cluster
    ok = signs["B"] == -1 and signs["A"] == 1 and aic_ok
    report("6 GLM variability sign and AIC identity", ok,
           f"sign with unstructured=1: {signs['A']:+.0f}, with structured=1: {signs['B']:+.0f}, "
           f"aic identity on {n_fits} fits: {aic_ok}")
    assert ok


def random_scene(rng, index):
    meta = SceneMeta(f"r{index:03d}", "rand", 10.0, 900.0)
    n_agents = int(rng.integers(2, 51))
    n_frames = int(rng.integers(20, 501))
    tracks = []
    for a in range(n_agents):
        kind = AgentKind.VEHICLE if rng.random() < 0.35 else AgentKind.PEDESTRIAN
        length = int(rng.integers(2, n_frames + 1))
        start = int(rng.integers(0, n_frames - length + 1))
        frames = np.arange(start, start + length)
        if rng.random() < 0.2 and length > 6:
            frames = np.sort(rng.choice(frames, length // 2, replace=False))
        step = 0.8 if kind is AgentKind.VEHICLE else 0.15
        heading = rng.normal(0, step, 2)
        pos = rng.uniform(0, 30, 2) + np.cumsum(heading + rng.normal(0, step / 2, (len(frames), 2)), axis=0)
        tracks.append(Track.from_frames(f"a{a}", kind, meta, frames, pos))
    return DatasetBundle({meta.scene_id: meta}, tuple(tracks))


def test_7_interaction_oracle(report):
    rng = np.random.default_rng(7)
    scenes = [random_scene(rng, i) for i in range(100)]
    t0 = time.perf_counter()
    event_mismatch = crossing_mismatch = n_events = n_cross = 0
    for b in scenes:
        events = find_interactions(b, annotate=False)
        got = sorted((e.scene_id, e.ped_id, e.veh_id, e.first_frame, e.last_frame) for e in events)
        event_mismatch += got != events_oracle(b)
        n_events += len(events)
        by_id = {t.agent_id: t for t in b.tracks}
        for e in events:
            ped, veh = by_id[e.ped_id], by_id[e.veh_id]
            c = crossing_priority(e, ped, veh)
            want = crossing_oracle(*span(ped, e.first_frame, e.last_frame),
                                   *span(veh, e.first_frame, e.last_frame))
            if want is None or c is None:
                crossing_mismatch += (want is None) != (c is None)
                continue
            n_cross += 1
            same_winner = (c.ped_cross_time < c.veh_cross_time) == (want[0] < want[1])
            close = abs(c.ped_cross_time - want[0]) < 1e-9 and abs(c.veh_cross_time - want[1]) < 1e-9
            crossing_mismatch += not (same_winner and close)
    elapsed = time.perf_counter() - t0
    ok = event_mismatch == 0 and crossing_mismatch == 0 and elapsed < 60
    report("7 interactions vs all-pairs oracle", ok,
           f"{n_events} events, {n_cross} crossings, {event_mismatch} scene / {crossing_mismatch} "
           f"crossing mismatches, {elapsed:.1f} s")
    assert ok


def test_8_real_datasets(report):
    report("8 real-dataset majorities", None, "needs the original recordings")
    pytest.skip("optional criterion: requires the real datasets, which are not distributed")
