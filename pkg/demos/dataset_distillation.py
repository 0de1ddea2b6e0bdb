"""
Dataset distillation: the training data as hyperparameters
===========================================================

Here the hyperparameters are not decay coefficients — they are the
coordinates of synthetic training points, one per class.  The inner loop
trains a softmax classifier on those few points alone; the outer loop moves
the points so the trained classifier fits the real labeled data.  Three
well-separated blobs distill into three points, one near each class mean.
"""

import numpy as np

from hypergrad import InverseStrategy, OptimizerState, run_ho
from hypergrad.problems import (
    DistillationSpec,
    distilled_points,
    gen_blobs,
    make_distillation,
)

spec = DistillationSpec(classes=3, per_class=1, dim=2)
labeled = gen_blobs(3, 50, dim=2, spread=0.6, radius=3.0, seed=0)
test = gen_blobs(3, 100, dim=2, spread=0.6, radius=3.0, seed=1)
problem = make_distillation(spec, labeled, test)

run = run_ho(
    problem,
    problem.init_lam(0),
    problem.init_w(0),
    outer_iters=300,
    inner_steps=20,
    opt_w=OptimizerState("adam", 0.1),
    opt_lam=OptimizerState("rmsprop", 0.05),
    strategy=InverseStrategy.neumann(5, scale=0.1),
    seed=0,
)

print("iter    val acc   test acc")
for r in run.records:
    if r.iteration % 50 == 0 or r.iteration == len(run.records) - 1:
        print(f"{r.iteration:4d}    {r.val_acc:7.3f}   {r.test_acc:8.3f}")

# where did the points end up?
feats, labels = distilled_points(spec, run.lam)
means = np.stack([labeled.inputs[labeled.targets == c].mean(axis=0) for c in range(3)])
print("\nclass   distilled point        class mean             distance")
for c in range(3):
    p, m = feats[labels == c][0], means[c]
    print(f"{c:5d}   ({p[0]:+6.2f}, {p[1]:+6.2f})      "
          f"({m[0]:+6.2f}, {m[1]:+6.2f})      {np.linalg.norm(p - m):8.3f}")

nearest = [int(np.argmin(np.linalg.norm(means - f, axis=1))) for f in feats]
print(f"\neach distilled point nearest its own class mean: {nearest == list(labels)}")
