"""Perceptual manifolds of a standard and an adversarially trained toy model.

Three classes live on 4-dimensional patches inside [0,1]^64. Each model is
trained, then projected gradient ascent from uniform noise collects points the
model labels with probability above 0.9. The standard model accepts points
spread over almost the whole cube; robust accuracy and the distance from
noise to the manifold grow with adversarial training.
"""

import tempfile

from pmanifold.pipelines import cmd_toy_pipeline

out = tempfile.mkdtemp(prefix="toy_")
res = cmd_toy_pipeline({"output_dir": out})

print(f"results in {out}\n")
cols = ["clean_acc", "robust_acc", "data_pr", "pm_pr", "dist_noise_mean", "dist_natural_mean", "align_score"]
print(f"{'model':>10} " + " ".join(f"{c:>17}" for c in cols))
for r in res["models"]:
    print(f"{r['model']:>10} " + " ".join(f"{r[c]:>17.3f}" for c in cols))
