"""
Optimizing hyperparameters can overfit the validation set
=========================================================

With one weight-decay hyperparameter per model weight, the outer
optimization has as many degrees of freedom as the model itself.  Give it a
small validation set with noisy labels and it will drive the validation
error all the way to zero — while the test error, measured on clean data it
never saw, stays stuck.  A control run with frozen hyperparameters shows
the effect comes from tuning, not from the inner training.
"""

from hypergrad import InverseStrategy, OptimizerState, inner_optimize, run_ho
from hypergrad.problems import PenalizedModelSpec, gen_blobs, make_penalized

# two overlapping classes, 50 train / 50 val / 1000 test; 40% of the
# validation labels are flipped, so "validation error 0" means memorization
dim = 192
common = dict(dim=dim, spread=1.0, radius=1.4)
train = gen_blobs(2, 25, seed=0, **common)
val = gen_blobs(2, 25, seed=1, label_noise=0.4, **common)
test = gen_blobs(2, 500, seed=2, **common)

spec = PenalizedModelSpec(model="logistic", decay_scope="per_param", init_decay=0.01)
problem = make_penalized(spec, train, val, test)
print(f"{problem.w_dim} weights, {sum(1 for _ in problem.lam_segments)} hyperparameter "
      f"segment(s) of matching size\n")

lam0, w0 = problem.init_lam(0), problem.init_w(0)
outer_iters, inner_steps = 400, 20

# tuned arm: alternate inner training with hyperparameter updates
tuned = run_ho(
    problem, lam0, w0, outer_iters, inner_steps,
    opt_w=OptimizerState("adam", 0.05),
    opt_lam=OptimizerState("rmsprop", 0.1),
    strategy=InverseStrategy.neumann(10, scale=0.05),
    seed=0,
)

# control arm: same inner training, hyperparameters never move
frozen_val_errs = []
w, opt = w0, OptimizerState("adam", 0.05)
for _ in range(outer_iters):
    w, _, opt = inner_optimize(problem, lam0, w, inner_steps, opt)
    _, va_acc = problem.scorer(lam0, w, problem.val_data)
    frozen_val_errs.append(1.0 - va_acc)

print("iter    tuned val err   tuned test err   frozen val err")
for rec, frozen_err in zip(tuned.records, frozen_val_errs):
    if rec.iteration % 50 == 0 or rec.iteration == len(tuned.records) - 1:
        print(f"{rec.iteration:4d}    {1 - rec.val_acc:13.3f}   "
              f"{1 - rec.test_acc:14.3f}   {frozen_err:14.3f}")

first_zero = next((r.iteration for r in tuned.records if 1 - r.val_acc == 0.0), None)
print(f"\ntuned arm first hits validation error 0 at iteration {first_zero};")
print(f"test error there: {1 - tuned.records[first_zero].test_acc:.3f}")
print(f"frozen arm's best validation error: {min(frozen_val_errs):.3f}")
