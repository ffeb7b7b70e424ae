"""End-to-end analysis: bundle -> features -> matrix -> clusters -> GLM."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import cluster, featmat, glmfit
from .config import DEFAULT_THRESHOLDS, Thresholds
from .featmat import PEDESTRIAN_FEATURES, DatasetLevel, FeatureMatrix
from .interact import interaction_features
from .pedfeat import pedestrian_features
from .trajstore import DatasetBundle
from .vehfeat import NoVehiclesError, Parked, all_vehicle_features, vehicle_means

log = logging.getLogger(__name__)


@dataclass
class FeatureSet:
    pedestrians: list
    stationary: list
    vehicles: list
    events: list
    dataset_level: dict[str, DatasetLevel]

    @property
    def parked(self):
        return [v for v in self.vehicles if isinstance(v, Parked)]


def extract_features(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> FeatureSet:
    peds = pedestrian_features(bundle, thresholds)
    vehs = all_vehicle_features(bundle, thresholds)
    inter, events = interaction_features(bundle, thresholds)
    level = {}
    for ds in bundle.dataset_ids:
        try:
            vm = vehicle_means(v for v in vehs if v.dataset_id == ds)
        except NoVehiclesError:
            vm = None
        level[ds] = DatasetLevel(peds.orientation_entropy.get(ds), vm, inter.get(ds))
    return FeatureSet(peds.features, peds.stationary, vehs, events, level)


@dataclass
class Analysis:
    features: FeatureSet
    raw: FeatureMatrix
    excluded: dict[str, list[str]]
    clean: FeatureMatrix
    standardized: FeatureMatrix
    model: cluster.ClusterModel
    labels: np.ndarray
    report: cluster.ClusterReport
    glm: glmfit.GlmFit | None = None
    glm_candidates: list = field(default_factory=list)
    glm_error: str | None = None


def build_matrix(features: FeatureSet, thresholds: Thresholds = DEFAULT_THRESHOLDS,
                 per_dataset_iqr: bool = False):
    raw, excluded = featmat.assemble(features.pedestrians, features.dataset_level)
    for ds, why in excluded.items():
        log.warning("dataset %s excluded: missing %s", ds, ", ".join(why))
    clean = featmat.remove_outliers(raw, thresholds.iqr_factor, per_dataset=per_dataset_iqr)
    return raw, excluded, clean


def glm_inputs(clean: FeatureMatrix, labels, positive_label: str = "A"):
    """Centred pedestrian feature columns and 0/1 outcome."""
    ped = featmat.center(clean.select(PEDESTRIAN_FEATURES))
    y = (np.asarray(labels, dtype=object) == positive_label).astype(float)
    return ped.values, y


def analyze(bundle: DatasetBundle, thresholds: Thresholds = DEFAULT_THRESHOLDS, seed: int = 0,
            restarts: int = 50, per_dataset_iqr: bool = False, positive_label: str = "A",
            fit_glm: bool = True) -> Analysis:
    feats = extract_features(bundle, thresholds)
    raw, excluded, clean = build_matrix(feats, thresholds, per_dataset_iqr)
    if len(clean) < 2:
        raise cluster.ClusterError("fewer than 2 rows survive preprocessing")
    std = featmat.standardize(clean)
    model, labels = cluster.kmeans_fit(std, seed=seed, restarts=restarts)
    report = cluster.build_report(clean, labels)
    result = Analysis(feats, raw, excluded, clean, std, model, labels, report)
    if fit_glm:
        X, y = glm_inputs(clean, labels, positive_label)
        try:
            _, cands = glmfit.enumerate_fits(X, y, PEDESTRIAN_FEATURES, positive_label=positive_label)
            result.glm_candidates = cands
            result.glm = glmfit.select_best(cands, PEDESTRIAN_FEATURES)
        except glmfit.GlmError as exc:
            result.glm_error = str(exc)
    return result
