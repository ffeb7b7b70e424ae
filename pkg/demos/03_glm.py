"""
Which pedestrian features predict the cluster?
==============================================

A binomial GLM (logit link) is fitted by IRLS on every subset of the seven
pedestrian features whose pairwise |r| stays below 0.3; the lowest AIC wins.
Subsets that separate the clusters perfectly have no finite estimate and are
reported rather than fitted.
"""
from trajenv import glmfit, pipeline, synthgen
from trajenv.featmat import PEDESTRIAN_FEATURES
from trajenv.trajstore import DatasetBundle

bundle = DatasetBundle.merge([
    synthgen.generate_many(synthgen.load_preset("road"), range(6)),
    synthgen.generate_many(synthgen.load_preset("campus"), range(100, 106)),
])
result = pipeline.analyze(bundle, seed=0)

print(f"{len(result.glm_candidates)} admissible subsets")
for c in result.glm_candidates:
    what = f"AIC {c.fit.aic:8.2f}" if c.fit else c.error.split(":")[0]
    print(f"  {'+'.join(c.subset):<45} {what}")

print("\nbest model (y = 1 for cluster A, the unstructured one):\n")
print(result.glm.table())

# flipping the encoding negates every coefficient
X, y = pipeline.glm_inputs(result.clean, result.labels, "B")
flipped = glmfit.irls_fit(X[:, [PEDESTRIAN_FEATURES.index(f) for f in result.glm.included_features]],
                          y, result.glm.included_features, positive_label="B")
print("\nwith y = 1 for cluster B:", dict(zip(flipped.names, flipped.coefficients.round(3))))
