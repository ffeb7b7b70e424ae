import numpy as np
import pytest

from trajenv.cluster import (
    UNRESOLVED,
    ClusterError,
    ClusterModel,
    build_report,
    classify,
    hartigan,
    inertia,
    kmeans,
    kmeans_fit,
    lloyd,
    majority_label,
    mean_ci,
)
from trajenv.featmat import FeatureMatrix, standardize

from oracles import exhaustive_kmeans


def fm(values, columns=("stop_fraction", "x"), datasets=None):
    values = np.asarray(values, float)
    n = len(values)
    ds = datasets if datasets is not None else ["d1"] * n
    return FeatureMatrix(values, ds, ["s1"] * n, [str(i) for i in range(n)], columns)


def blobs(rng, n=20, sep=10.0):
    a = rng.normal(0, 1, (n, 2))
    b = rng.normal(0, 1, (n, 2)) + (sep, 0)
    return np.vstack([a, b])


def partition_equal(l1, l2):
    l1, l2 = np.asarray(l1), np.asarray(l2)
    return np.array_equal(l1 == l1[0], l2 == l2[0])


def test_well_separated_blobs(rng):
    X = blobs(rng)
    res = kmeans(X, seed=1)
    assert partition_equal(res.labels, [0] * 20 + [1] * 20)
    sub = np.vstack([X[:6], X[20:26]])
    assert kmeans(sub, seed=1).inertia <= exhaustive_kmeans(sub) + 1e-9


def test_matches_exhaustive_partition(rng):
    for _ in range(20):
        n = int(rng.integers(2, 11))
        X = rng.normal(size=(n, 3))
        assert kmeans(X, seed=3).inertia <= exhaustive_kmeans(X) + 1e-9


def test_identical_points():
    res = kmeans(np.ones((8, 3)), seed=0)
    assert res.inertia == 0
    np.testing.assert_array_equal(res.centroids[0], res.centroids[1])


def test_deterministic(rng):
    X = rng.normal(size=(60, 4))
    a, b = kmeans(X, seed=7), kmeans(X, seed=7)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    np.testing.assert_array_equal(a.labels, b.labels)


def test_lloyd_monotone(rng):
    for _ in range(30):
        X = rng.normal(size=(50, 3))
        res = lloyd(X, X[rng.choice(50, 2, replace=False)])
        assert all(b <= a + 1e-12 for a, b in zip(res.history, res.history[1:]))


def test_empty_cluster_repaired():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    res = lloyd(X, np.array([[1.0], [100.0]]))
    assert len(set(res.labels.tolist())) == 2
    assert all(b <= a + 1e-12 for a, b in zip(res.history, res.history[1:]))


def test_too_few_rows():
    with pytest.raises(ClusterError):
        kmeans(np.ones((1, 2)))


def test_fit_names_a_by_stop_fraction(rng):
    v = np.vstack([np.column_stack([rng.normal(0.8, 0.02, 15), rng.normal(size=15)]),
                   np.column_stack([rng.normal(0.1, 0.02, 15), rng.normal(size=15)])])
    z = standardize(fm(v))
    model, labels = kmeans_fit(z, seed=0)
    assert list(labels[:15]) == ["A"] * 15 and list(labels[15:]) == ["B"] * 15
    np.testing.assert_array_equal(classify(model, z), labels)


def test_classify_ties_and_perturbation(rng):
    v = np.vstack([rng.normal(0, 1, (10, 2)), rng.normal(0, 1, (10, 2)) + 8])
    z = standardize(fm(v))
    model, _ = kmeans_fit(z, seed=0)
    a, b = model.centroids
    rows = np.vstack([a, a + 1e-6, (a + b) / 2])
    probe = FeatureMatrix(rows, ["d"] * 3, ["s"] * 3, ["0", "1", "2"], z.columns)
    assert list(classify(model, probe)) == ["A", "A", "A"]
    with pytest.raises(ClusterError):
        classify(model, fm(v, columns=("p", "q")))


def test_model_round_trip(tmp_path, rng):
    z = standardize(fm(rng.normal(size=(20, 2))))
    model, labels = kmeans_fit(z, seed=2)
    model.save(tmp_path / "m.json")
    back = ClusterModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(classify(back, z), labels)


def test_majority_rules():
    labels = ["A"] * 9 + ["B"] + ["A", "B"] + ["B"] * 3
    groups = ["x"] * 10 + ["y"] * 2 + ["z"] * 3
    assert majority_label(labels, groups) == {"x": "A", "y": UNRESOLVED, "z": "B"}


def test_mean_ci():
    assert mean_ci([3.0]) == (3.0, None)
    assert mean_ci([1, 1, 1, 1]) == (1.0, 0.0)
    m, hw = mean_ci([0, 2])
    assert m == 1.0 and hw == pytest.approx(1.96, abs=1e-4)


def test_report_relabels_by_majority():
    v = np.array([[0.9, 0], [0.8, 0], [0.1, 0], [0.2, 0]])
    raw = fm(v, datasets=["d1", "d1", "d1", "d2"])
    rep = build_report(raw, np.array(["A", "A", "B", "B"], dtype=object))
    assert rep.majority == {"d1": "A", "d2": "B"}
    a = next(s for s in rep.summaries if s.cluster == "A" and s.feature == "stop_fraction")
    assert a.n == 3 and a.mean == pytest.approx(0.6)


def test_kmeans_history_monotone_with_transfers(rng):
    for _ in range(30):
        X = rng.normal(size=(12, 5))
        res = kmeans(X, seed=int(rng.integers(1000)), restarts=3)
        assert all(b <= a + 1e-9 for a, b in zip(res.history, res.history[1:]))


def test_hartigan_escapes_lloyd_fixed_point():
    # 3 is nearer its own centroid (1.5) than the other (5.9), so Lloyd keeps
    # it, yet moving it lowers the inertia from 4.5 to 2.9**2 / 2
    X = np.array([[0.0], [3.0], [5.9]])
    res = lloyd(X, np.array([[1.5], [5.9]]))
    assert res.inertia == pytest.approx(4.5)
    better = hartigan(X, res.labels, 2)
    assert inertia(X, better) == pytest.approx(2.9 ** 2 / 2)
