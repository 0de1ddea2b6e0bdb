"""
Truncated unrolling is a truncated Neumann series
=================================================

Differentiating through i SGD steps that start *at* the inner optimum gives
exactly the hypergradient you get from an i-term Neumann approximation of
the inverse Hessian.  This script checks the identity numerically, then
shows the two failure modes of the series: slow contraction when the step
size is safe, and divergence when it is not.
"""

import numpy as np

from hypergrad import (
    InverseStrategy,
    approx_ihvp,
    hypergradient,
    unrolled_hypergradient,
)
from hypergrad.experiments import neumann_inverse_partial_sums
from hypergrad.problems import (
    exact_quadratic_hypergradient,
    make_quadratic,
    random_quadratic,
)

spec = random_quadratic(m=10, n=4, seed=1)
problem = make_quadratic(spec)
lam = problem.init_lam(1)
w_star, _ = exact_quadratic_hypergradient(spec, lam)

lam_max = float(np.linalg.eigvalsh(spec.a).max())
alpha = 0.9 / lam_max  # safe: the recurrence contracts

# ---------------------------------------------------------------------
# the identity: unrolling i steps from w* == neumann with i terms
# ---------------------------------------------------------------------
print(f"step size {alpha:.4f} (0.9 / max eigenvalue {lam_max:.3f})\n")
print("terms   |unrolled - neumann|   |neumann - exact|")
exact = hypergradient(problem, lam, w_star, InverseStrategy.exact_dense()).total
for i in (1, 3, 10, 30, 100):
    via_neumann = hypergradient(
        problem, lam, w_star, InverseStrategy.neumann(i, scale=alpha)
    ).total
    via_unrolling = unrolled_hypergradient(problem, lam, w_star, i, alpha)
    ident = np.max(np.abs(via_unrolling.data - via_neumann.data))
    truncation = np.max(np.abs(via_neumann.data - exact.data))
    print(f"{i:5d}   {ident:19.2e}   {truncation:17.2e}")

# ---------------------------------------------------------------------
# the same convergence, seen on the inverse itself
# ---------------------------------------------------------------------
sums = neumann_inverse_partial_sums(spec.a, alpha, [1, 10, 50, 200])
inv = np.linalg.inv(spec.a)
print("\npartial sums of the series vs the true inverse:")
for i in (1, 10, 50, 200):
    print(f"  {i:3d} terms: max |diff| = {np.max(np.abs(sums[i] - inv)):.2e}")

# ---------------------------------------------------------------------
# too large a step and the recurrence blows up -- flagged, not fatal
# ---------------------------------------------------------------------
rng = np.random.default_rng(1)
v = w_star.with_data(rng.standard_normal(spec.m))
_, diag = approx_ihvp(
    InverseStrategy.neumann(200, scale=3.0 / lam_max), problem, lam, w_star, v
)
print(f"\nat step size 3/max-eig: diverged = {diag['diverged']} "
      f"after {diag['ihvp_iterations']} terms")
