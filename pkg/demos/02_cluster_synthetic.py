"""
Clustering road and campus scenes
=================================

Ten seeded scenes of each regime go through the full pipeline: features,
outlier removal, standardization and two-cluster k-means.  Campus scenes
should land in cluster A, the cluster with the higher stop fraction.
"""
from trajenv import pipeline, synthgen
from trajenv.trajstore import DatasetBundle

bundle = DatasetBundle.merge([
    synthgen.generate_many(synthgen.load_preset("road"), range(10)),
    synthgen.generate_many(synthgen.load_preset("campus"), range(100, 110)),
])
result = pipeline.analyze(bundle, seed=0, fit_glm=False)

print(f"{len(result.raw)} pedestrian rows, {len(result.clean)} after IQR outlier removal")
for ds, why in result.excluded.items():
    print(f"  excluded {ds}: {', '.join(why)}")

print("\nscene        A      B   label")
for scene, frac in result.report.scene_fractions.items():
    print(f"{scene:<11}{frac['A']:>5.0%}{frac['B']:>7.0%}   {result.report.scene_majority[scene]}")

# summaries use each dataset's majority label, with normal 95% intervals
print("\nfeature                cluster      mean       95% CI")
for s in result.report.summaries:
    if s.feature in ("stop_fraction", "variability", "path_efficiency", "veh_mean_speed", "priority_ratio"):
        print(f"{s.feature:<23}{s.cluster:^7}{s.mean:>10.4f}   [{s.ci_low:.4f}, {s.ci_high:.4f}]")
