"""Two-cluster k-means over standardized features and cluster reporting.

Clusters are named so that ``A`` is the one whose rows have the higher mean
pedestrian stop fraction.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .featmat import ColumnStats, FeatureMatrix, apply_standardization

CLUSTER_NAMES = ("A", "B")
UNRESOLVED = "Unresolved"
Z95 = 1.959963984540054


class ClusterError(ValueError):
    pass


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int
    history: list[float] = field(default_factory=list)


def _sq_dist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int = 300) -> KMeansResult:
    """Lloyd iterations until the assignment stops changing.

    ``history`` holds the inertia after every assignment step; it never
    increases.  An emptied cluster is re-seeded at the point farthest from
    its assigned centroid.
    """
    C = np.array(centroids, dtype=float)
    k = len(C)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(X, C)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own = d2[np.arange(len(X)), new]
            far = int(np.argmax(own))
            new[far] = empty
            C[empty] = X[far]
            d2[far] = _sq_dist(X[far:far + 1], C)[0]
            counts = np.bincount(new, minlength=k)
        history.append(float(((X - C[new]) ** 2).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
    inertia = float(((X - C[labels]) ** 2).sum())
    return KMeansResult(C, labels, inertia, it, history)


def hartigan(X: np.ndarray, labels: np.ndarray, k: int, history: list | None = None,
             max_sweeps: int = 100) -> np.ndarray:
    """Single-point transfers that lower the inertia, until none is left.

    Moving ``x`` from cluster ``a`` to ``b`` changes the inertia by
    ``n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2``; Lloyd's assignment step
    ignores the centroid shift and can stall where such a move still helps.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(float)
    C = np.array([X[labels == j].mean(axis=0) if counts[j] else X[0] for j in range(k)])
    for _ in range(max_sweeps):
        moved = False
        for i in range(len(X)):
            a = labels[i]
            if counts[a] < 2:
                continue
            d2 = ((X[i] - C) ** 2).sum(axis=1)
            gain = counts / (counts + 1) * d2
            gain[a] = counts[a] / (counts[a] - 1) * d2[a]
            delta = gain - gain[a]
            b = int(np.argmin(delta))
            if delta[b] >= -1e-12 * max(1.0, gain[a]):
                continue
            C[a] = (C[a] * counts[a] - X[i]) / (counts[a] - 1)
            C[b] = (C[b] * counts[b] + X[i]) / (counts[b] + 1)
            counts[a] -= 1
            counts[b] += 1
            labels[i] = b
            moved = True
            if history is not None:
                history.append(inertia(X, labels, k))
        if not moved:
            break
    return labels


def kmeans(X, k: int = 2, seed: int = 0, restarts: int = 50, max_iter: int = 300) -> KMeansResult:
    """Best of ``restarts`` k-means++ initialised Lloyd runs.

    Each run is refined by Hartigan single-point transfers, which escape
    Lloyd fixed points that are not local optima under single moves.

    Ties in inertia go to the earliest restart, so the result depends only on
    ``seed``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ClusterError("expected a 2-D data matrix")
    if len(X) < k:
        raise ClusterError(f"need at least {k} rows, got {len(X)}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        res = lloyd(X, kmeans_pp_init(X, k, rng), max_iter)
        labels = hartigan(X, res.labels, k, res.history)
        if not np.array_equal(labels, res.labels):
            # polish: the transfers leave exact means, Lloyd confirms the fixed point
            C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
            polished = lloyd(X, C, max_iter)
            polished.history = res.history + polished.history
            polished.n_iter += res.n_iter
            res = polished
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def inertia(X, labels, k: int = 2) -> float:
    X = np.asarray(X, dtype=float)
    total = 0.0
    for j in range(k):
        pts = X[labels == j]
        if len(pts):
            total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


# --------------------------------------------------------------------------
# model


@dataclass
class ClusterModel:
    """Fitted two-cluster model in standardized feature space.

    ``centroids[0]`` is cluster ``A``.
    """

    centroids: np.ndarray
    columns: tuple[str, ...]
    column_stats: ColumnStats
    inertia: float
    seed: int
    restarts: int = 50

    def standardize(self, matrix: FeatureMatrix) -> np.ndarray:
        self._check_columns(matrix)
        return apply_standardization(matrix, self.column_stats)

    def _check_columns(self, matrix: FeatureMatrix):
        if tuple(matrix.columns) != tuple(self.columns):
            raise ClusterError(f"column mismatch: model has {list(self.columns)}, data has {list(matrix.columns)}")

    def to_dict(self) -> dict:
        return {
            "centroids": {name: [float(x) for x in c] for name, c in zip(CLUSTER_NAMES, self.centroids)},
            "columns": list(self.columns),
            "column_stats": self.column_stats.to_dict(self.columns),
            "inertia": self.inertia,
            "seed": self.seed,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        columns = tuple(d["columns"])
        return cls(
            centroids=np.array([d["centroids"][n] for n in CLUSTER_NAMES], dtype=float),
            columns=columns,
            column_stats=ColumnStats.from_dict(d["column_stats"], columns),
            inertia=float(d["inertia"]),
            seed=int(d["seed"]),
            restarts=int(d.get("restarts", 50)),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def kmeans_fit(standardized: FeatureMatrix, seed: int = 0, restarts: int = 50, max_iter: int = 300,
               raw: FeatureMatrix | None = None, name_by: str = "stop_fraction"):
    """Fit the two-cluster model; returns ``(model, labels)``.

    ``standardized`` must carry the statistics it was scaled with.  Cluster
    ``A`` is the one with the higher mean of ``name_by`` (the standardized
    column orders clusters exactly as the raw one would).
    """
    if standardized.column_stats is None:
        raise ClusterError("matrix must be standardized (column_stats missing)")
    res = kmeans(standardized.values, 2, seed, restarts, max_iter)
    col = standardized.column(name_by)
    means = [col[res.labels == j].mean() for j in range(2)]
    order = [0, 1] if means[0] >= means[1] else [1, 0]
    centroids = res.centroids[order]
    labels = np.where(res.labels == order[0], "A", "B").astype(object)
    model = ClusterModel(centroids, standardized.columns, standardized.column_stats, res.inertia, seed, restarts)
    return model, labels


def classify(model: ClusterModel, standardized: FeatureMatrix) -> np.ndarray:
    """Nearest-centroid labels for rows already scaled with the model's stats.

    Equidistant rows go to ``A``.
    """
    model._check_columns(standardized)
    idx = np.argmin(_sq_dist(standardized.values, model.centroids), axis=1)
    return np.array(CLUSTER_NAMES, dtype=object)[idx]


def classify_raw(model: ClusterModel, matrix: FeatureMatrix) -> np.ndarray:
    z = model.standardize(matrix)
    idx = np.argmin(_sq_dist(z, model.centroids), axis=1)
    return np.array(CLUSTER_NAMES, dtype=object)[idx]


# --------------------------------------------------------------------------
# reporting


def cluster_fractions(labels, groups) -> dict[str, dict[str, float]]:
    out = {}
    for g in dict.fromkeys(groups):
        sel = [lab for lab, gg in zip(labels, groups) if gg == g]
        c = Counter(sel)
        out[g] = {name: c[name] / len(sel) for name in CLUSTER_NAMES}
    return out


def majority_label(labels, groups) -> dict[str, str]:
    """Cluster holding more than half of each group's rows, else ``Unresolved``."""
    out = {}
    for g, frac in cluster_fractions(labels, groups).items():
        if frac["A"] > 0.5:
            out[g] = "A"
        elif frac["B"] > 0.5:
            out[g] = "B"
        else:
            out[g] = UNRESOLVED
    return out


@dataclass(frozen=True)
class Summary:
    feature: str
    cluster: str
    n: int
    mean: float
    ci_low: float | None
    ci_high: float | None


def mean_ci(values) -> tuple[float, float | None]:
    """Mean and normal-approximation 95% half-width (``None`` if n < 2)."""
    v = np.asarray(values, dtype=float)
    m = float(v.mean())
    if len(v) < 2:
        return m, None
    return m, Z95 * float(v.std(ddof=1)) / math.sqrt(len(v))


def cluster_summaries(matrix: FeatureMatrix, labels) -> list[Summary]:
    """Per-cluster, per-feature mean with 95% CI in the matrix's own units."""
    labels = np.asarray(labels, dtype=object)
    out = []
    for name in CLUSTER_NAMES:
        sel = labels == name
        if not sel.any():
            continue
        for k, col in enumerate(matrix.columns):
            m, hw = mean_ci(matrix.values[sel, k])
            out.append(Summary(col, name, int(sel.sum()), m,
                               None if hw is None else m - hw, None if hw is None else m + hw))
    return out


@dataclass
class ClusterReport:
    labels: np.ndarray
    fractions: dict[str, dict[str, float]]
    majority: dict[str, str]
    summaries: list[Summary]
    scene_fractions: dict[str, dict[str, float]] = field(default_factory=dict)
    scene_majority: dict[str, str] = field(default_factory=dict)


def build_report(raw: FeatureMatrix, labels) -> ClusterReport:
    """Fractions, majorities and majority-relabelled summaries.

    Summaries assign every row its dataset's majority label; rows of
    unresolved datasets are left out of them.
    """
    labels = np.asarray(labels, dtype=object)
    majority = majority_label(labels, raw.dataset_ids)
    relabelled = np.array([majority[d] for d in raw.dataset_ids], dtype=object)
    return ClusterReport(
        labels=labels,
        fractions=cluster_fractions(labels, raw.dataset_ids),
        majority=majority,
        summaries=cluster_summaries(raw, relabelled),
        scene_fractions=cluster_fractions(labels, raw.scene_ids),
        scene_majority=majority_label(labels, raw.scene_ids),
    )
