"""Command-line entry point.

Subcommands ``synth``, ``features``, ``cluster``, ``glm`` and ``classify``.
Exit status: 0 success, 1 internal error, 2 user or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, cluster, featmat, glmfit, synthgen
from .config import Thresholds
from .featmat import PEDESTRIAN_FEATURES
from .interact import write_events_csv
from .pedfeat import PEDESTRIAN_COLUMNS
from .pipeline import analyze, build_matrix, extract_features
from .trajstore import (
    ConfigError,
    DatasetBundle,
    SceneMeta,
    TrajStoreError,
    adapt_generic,
    adapt_sdd,
    as_transform,
    load_normalized,
    load_scene_meta,
    load_transform,
    write_normalized,
)
from .vehfeat import Parked

log = logging.getLogger("trajenv")

ADAPTERS = ("normalized", "sdd", "generic")


class UsageError(Exception):
    """Bad command-line or configuration input (exit code 2)."""


@dataclass
class RunConfig:
    inputs: list[dict]
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 0
    restarts: int = 50
    per_dataset_iqr: bool = False
    positive_label: str = "A"
    out: str = "trajenv-out"
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs,
            "thresholds": self.thresholds.to_dict(),
            "seed": self.seed,
            "restarts": self.restarts,
            "per_dataset_iqr": self.per_dataset_iqr,
            "positive_label": self.positive_label,
        }

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(args) -> RunConfig:
    raw: dict = {}
    base = Path.cwd()
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from None
        base = path.resolve().parent
    inputs = list(raw.get("inputs", []))
    for p in getattr(args, "input", None) or []:
        inputs.append({"path": p})
    for inp in inputs:
        inp.setdefault("adapter", args.adapter or "normalized")
        if inp["adapter"] not in ADAPTERS:
            raise UsageError(f"unknown adapter {inp['adapter']!r}; choose from {', '.join(ADAPTERS)}")
    try:
        thresholds = Thresholds.from_dict(raw.get("thresholds"))
    except (KeyError, TypeError) as exc:
        raise UsageError(f"bad thresholds: {exc}") from None
    cfg = RunConfig(
        inputs=inputs,
        thresholds=thresholds,
        seed=int(raw.get("seed", 0)),
        restarts=int(raw.get("restarts", 50)),
        per_dataset_iqr=bool(raw.get("per_dataset_iqr", False)),
        positive_label=str(raw.get("positive_label", "A")),
        out=str(raw.get("out", "trajenv-out")),
        base_dir=base,
    )
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "per_dataset_iqr", False):
        cfg.per_dataset_iqr = True
    if args.out:
        cfg.out = args.out
    if cfg.positive_label not in cluster.CLUSTER_NAMES:
        raise UsageError("positive_label must be 'A' or 'B'")
    return cfg


def _resolve(cfg: RunConfig, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else cfg.base_dir / p


def _scene(cfg, inp) -> SceneMeta:
    scene = inp.get("scene")
    if isinstance(scene, str):
        metas = load_scene_meta(_resolve(cfg, scene))
        if len(metas) != 1:
            raise UsageError(f"{inp['path']}: adapter input needs exactly one scene")
        return metas[0]
    if not isinstance(scene, dict):
        raise UsageError(f"{inp['path']}: adapter {inp['adapter']!r} needs a 'scene' object")
    return SceneMeta.from_dict(scene)


def _transform(cfg, inp, required: bool):
    t = inp.get("transform")
    if t is None:
        if required:
            raise UsageError(f"{inp['path']}: adapter {inp['adapter']!r} needs a 'transform'")
        return None
    if isinstance(t, str):
        return load_transform(_resolve(cfg, t))
    return as_transform(t)


def load_inputs(cfg: RunConfig) -> DatasetBundle:
    if not cfg.inputs:
        raise UsageError("no inputs given (use --config or --input)")
    bundles = []
    for inp in cfg.inputs:
        path = _resolve(cfg, inp["path"])
        if not path.exists():
            raise UsageError(f"input not found: {path}")
        if inp["adapter"] == "normalized":
            scenes = inp.get("scenes")
            bundles.append(load_normalized(path, _resolve(cfg, scenes) if scenes else None))
        elif inp["adapter"] == "sdd":
            bundles.append(adapt_sdd(path, _scene(cfg, inp), _transform(cfg, inp, required=True)))
        else:
            bundles.append(adapt_generic(
                path, inp.get("column_map") or {}, _scene(cfg, inp),
                kind_map=inp.get("kind_map"), transform=_transform(cfg, inp, required=False),
                delimiter=inp.get("delimiter", ","),
            ))
    bundle = DatasetBundle.merge(bundles)
    if not bundle.tracks:
        raise UsageError("inputs contain no usable tracks")
    return bundle


# --------------------------------------------------------------------------
# writers


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, cfg: RunConfig, command: str, extra: dict | None = None) -> None:
    manifest = {
        "tool": "trajenv",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "threshold_overrides": cfg.thresholds.overrides(),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        manifest.update(extra)
    _dump_json(out / f"manifest_{command}.json", manifest)


def _dump_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _num(x):
    return "" if x is None else repr(float(x))


def write_feature_outputs(out: Path, feats, raw, clean, excluded) -> None:
    with open(out / "pedestrian_features.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dataset_id", "scene_id", "agent_id") + PEDESTRIAN_COLUMNS)
        for p in feats.pedestrians:
            w.writerow((p.dataset_id, p.scene_id, p.agent_id) + tuple(_num(getattr(p, c)) for c in PEDESTRIAN_COLUMNS))
    with open(out / "vehicle_features.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dataset_id", "scene_id", "agent_id", "parked",
                    "veh_mean_speed", "veh_stop_fraction", "veh_variability"))
        for v in feats.vehicles:
            if isinstance(v, Parked):
                w.writerow((v.dataset_id, v.scene_id, v.agent_id, 1, _num(v.mean_speed), "", ""))
            else:
                w.writerow((v.dataset_id, v.scene_id, v.agent_id, 0,
                            _num(v.mean_speed), _num(v.stop_fraction), _num(v.variability)))
    write_events_csv(feats.events, out / "interactions.csv")
    datasets = {}
    for ds, lvl in feats.dataset_level.items():
        vm, it = lvl.vehicles, lvl.interaction
        datasets[ds] = {
            "orientation_entropy": lvl.orientation_entropy,
            "veh_mean_speed": vm and vm.mean_speed,
            "veh_stop_fraction": vm and vm.stop_fraction,
            "veh_variability": vm and vm.variability,
            "n_moving_vehicles": vm.n_vehicles if vm else 0,
            "approach_entropy": it and it.approach_entropy,
            "priority_ratio": it and it.priority_ratio,
            "v2p_ratio": it and it.v2p_ratio,
            "n_events": it.n_events if it else 0,
            "n_crossings": it.n_crossings if it else 0,
            "excluded": excluded.get(ds, []),
        }
    _dump_json(out / "dataset_features.json", {
        "datasets": datasets,
        "stationary_pedestrians": [list(s) for s in feats.stationary],
        "rows_assembled": len(raw),
        "rows_after_outlier_removal": len(clean),
    })
    clean.save(out / "feature_matrix.csv")


def write_cluster_outputs(out: Path, result) -> None:
    result.model.save(out / "model.json")
    m, rep = result.clean, result.report
    with open(out / "cluster_labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dataset_id", "scene_id", "agent_id", "cluster"))
        for d, s, a, lab in zip(m.dataset_ids, m.scene_ids, m.agent_ids, rep.labels):
            w.writerow((d, s, a, lab))
    with open(out / "cluster_fractions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("level", "id", "fraction_A", "fraction_B", "majority"))
        for level, fr, maj in (("dataset", rep.fractions, rep.majority),
                               ("scene", rep.scene_fractions, rep.scene_majority)):
            for k, f in fr.items():
                w.writerow((level, k, repr(f["A"]), repr(f["B"]), maj[k]))
    with open(out / "cluster_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("feature", "cluster", "n", "mean", "ci_low", "ci_high"))
        for s in rep.summaries:
            w.writerow((s.feature, s.cluster, s.n, _num(s.mean), _num(s.ci_low), _num(s.ci_high)))
    _dump_json(out / "cluster_report.json", {
        "inertia": result.model.inertia,
        "cluster_sizes": {n: int(np.sum(rep.labels == n)) for n in cluster.CLUSTER_NAMES},
        "dataset_fractions": rep.fractions,
        "dataset_majority": rep.majority,
        "scene_fractions": rep.scene_fractions,
        "scene_majority": rep.scene_majority,
        "summaries": [s.__dict__ for s in rep.summaries],
    })


def write_glm_outputs(out: Path, result, positive_label: str) -> None:
    with open(out / "glm_candidates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("features", "aic", "log_likelihood", "error"))
        for c in result.glm_candidates:
            w.writerow(("+".join(c.subset), _num(c.fit and c.fit.aic),
                        _num(c.fit and c.fit.log_likelihood), c.error or ""))
    fit = result.glm
    _dump_json(out / "glm.json", {
        **fit.to_dict(),
        "sign_convention": {
            "this_fit": f"cluster {positive_label} = 1",
            "opposite": f"cluster {'B' if positive_label == 'A' else 'A'} = 1 gives the same fit with all signs flipped",
        },
    })
    (out / "glm_table.txt").write_text(fit.table() + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    out = Path(args.out or "synthetic")
    out.mkdir(parents=True, exist_ok=True)
    try:
        params = synthgen.load_preset(args.preset)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    seed = args.seed or 0
    bundle = synthgen.generate_many(params, range(seed, seed + args.scenes))
    path = out / f"{args.preset}.csv"
    write_normalized(bundle, path)
    _dump_json(out / f"{args.preset}.params.json", replace(params, seed=seed).to_dict())
    print(f"wrote {len(bundle.tracks)} tracks in {len(bundle.scenes)} scene(s) to {path}")
    return 0


def cmd_features(args) -> int:
    cfg = load_config(args)
    bundle = load_inputs(cfg)
    feats = extract_features(bundle, cfg.thresholds)
    raw, excluded, clean = build_matrix(feats, cfg.thresholds, cfg.per_dataset_iqr)
    out = _out_dir(cfg)
    write_feature_outputs(out, feats, raw, clean, excluded)
    write_manifest(out, cfg, "features", {"load_warnings": list(bundle.warnings)})
    print(f"{len(feats.pedestrians)} pedestrian rows, {len(clean)} after outlier removal -> {out}")
    return 0


def _analyze(cfg: RunConfig, fit_glm: bool):
    bundle = load_inputs(cfg)
    return analyze(bundle, cfg.thresholds, seed=cfg.seed, restarts=cfg.restarts,
                   per_dataset_iqr=cfg.per_dataset_iqr, positive_label=cfg.positive_label,
                   fit_glm=fit_glm)


def cmd_cluster(args) -> int:
    cfg = load_config(args)
    result = _analyze(cfg, fit_glm=False)
    out = _out_dir(cfg)
    write_feature_outputs(out, result.features, result.raw, result.clean, result.excluded)
    write_cluster_outputs(out, result)
    write_manifest(out, cfg, "cluster")
    for ds, lab in result.report.majority.items():
        fr = result.report.fractions[ds]
        print(f"{ds}: {lab}  (A {fr['A']:.1%}, B {fr['B']:.1%})")
    return 0


def cmd_glm(args) -> int:
    cfg = load_config(args)
    result = _analyze(cfg, fit_glm=True)
    out = _out_dir(cfg)
    write_cluster_outputs(out, result)
    if result.glm is None:
        raise UsageError(f"GLM could not be fitted: {result.glm_error}. Separated or singular data: "
                         "check that clusters overlap in at least one pedestrian feature.")
    write_glm_outputs(out, result, cfg.positive_label)
    write_manifest(out, cfg, "glm")
    print(result.glm.table())
    return 0


def cmd_classify(args) -> int:
    if not args.model:
        raise UsageError("classify needs --model <model.json>")
    try:
        model = cluster.ClusterModel.load(args.model)
    except FileNotFoundError:
        raise UsageError(f"model not found: {args.model}") from None
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{args.model}: not a cluster model ({exc})") from None
    cfg = load_config(args)
    bundle = load_inputs(cfg)
    feats = extract_features(bundle, cfg.thresholds)
    raw, excluded = featmat.assemble(feats.pedestrians, feats.dataset_level)
    if len(raw) == 0:
        raise UsageError("no classifiable pedestrian rows in input"
                         + (f" (excluded: {excluded})" if excluded else ""))
    try:
        labels = cluster.classify_raw(model, raw)
    except cluster.ClusterError as exc:
        raise UsageError(str(exc)) from None
    majority = cluster.majority_label(labels, raw.dataset_ids)
    overall = cluster.majority_label(labels, ["all"] * len(labels))["all"]
    z = model.standardize(raw)
    diag = []
    for k, col in enumerate(model.columns):
        mean_z = float(z[:, k].mean())
        a, b = model.centroids[:, k]
        nearer = "A" if abs(mean_z - a) <= abs(mean_z - b) else "B"
        diag.append({"feature": col, "mean": float(raw.values[:, k].mean()), "z": mean_z,
                     "centroid_A_z": float(a), "centroid_B_z": float(b), "nearer": nearer})
    print(f"label: {overall}")
    for ds, lab in majority.items():
        print(f"  {ds}: {lab}")
    print(f"{'feature':<22}{'z':>9}{'A':>9}{'B':>9}  nearer")
    for d in diag:
        print(f"{d['feature']:<22}{d['z']:>9.3f}{d['centroid_A_z']:>9.3f}{d['centroid_B_z']:>9.3f}  {d['nearer']}")
    if args.out:
        out = _out_dir(cfg)
        _dump_json(out / "classification.json", {
            "label": overall, "dataset_labels": majority,
            "fractions": cluster.cluster_fractions(labels, raw.dataset_ids),
            "diagnostics": diag, "excluded": excluded,
        })
        write_manifest(out, cfg, "classify", {"model": str(args.model)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--seed", type=int, default=None, help="random seed (k-means restarts, synth)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--adapter", choices=ADAPTERS, help="default adapter for inputs that name none")
    common.add_argument("--input", action="append", help="normalized CSV input (repeatable)")
    common.add_argument("--per-dataset-iqr", action="store_true",
                        help="compute outlier fences per dataset instead of on the combined matrix")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="trajenv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"trajenv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("features", parents=[common], help="extract per-pedestrian and dataset features")
    sub.add_parser("cluster", parents=[common], help="k-means with two clusters plus cluster report")
    sub.add_parser("glm", parents=[common], help="logistic GLM of cluster label on pedestrian features")
    c = sub.add_parser("classify", parents=[common], help="label new data with a fitted model")
    c.add_argument("--model", help="model.json written by 'cluster'")
    s = sub.add_parser("synth", parents=[common], help="write synthetic scenes from a preset")
    s.add_argument("--preset", default="road", help="road or campus")
    s.add_argument("--scenes", type=int, default=1, help="number of scenes (consecutive seeds)")
    return p


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "cluster": cmd_cluster,
    "glm": cmd_glm,
    "classify": cmd_classify,
}

USER_ERRORS = (UsageError, TrajStoreError, ConfigError, featmat.MatrixError, cluster.ClusterError,
               glmfit.GlmError, ValueError, FileNotFoundError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except USER_ERRORS as exc:
        print(f"trajenv {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"trajenv {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
