"""
Robust PCA by principal component pursuit
=========================================

An ``n x n`` matrix ``M = X* + Z*`` is the sum of a rank-``q`` part and a
sparse part of random signs. We minimize ``||X||_* + lam ||M - X||_1`` and
look at how well ``X*`` comes back, for two choices of the weight ``lam``.
"""

import math

import numpy as np

from admmflow import (SolverConfig, gen_rpca_instance, recovery_error, rpca_problem, run,
                      svd)
from admmflow.solvers import with_schedule

n, q = 60, 3
s = int(0.05 * n * n)

# ---------------------------------------------------------------------------
# With lam = 1/n the l1 term is so cheap that the minimizer puts all of M into
# the sparse part: X = 0 already has a smaller objective than X = X*.
weak = gen_rpca_instance(n, q, s, seed=1, lam=1.0 / n)
prob = rpca_problem(weak)
print(f"lam = 1/n:        Phi(0) = {prob.objective(np.zeros((n, n))):8.3f}, "
      f"Phi(X*) = {prob.objective(weak.X_star):8.3f}")

# ---------------------------------------------------------------------------
# With lam = 1/sqrt(n) the truth is favoured, and ADMM recovers it.
inst = gen_rpca_instance(n, q, s, seed=1, lam=1.0 / math.sqrt(n))
prob = rpca_problem(inst)
print(f"lam = 1/sqrt(n):  Phi(0) = {prob.objective(np.zeros((n, n))):8.3f}, "
      f"Phi(X*) = {prob.objective(inst.X_star):8.3f}")

print("\nrecovery error ||X - X*||_F / ||X*||_F after 100 / 400 iterations")
for schedule, r in (("none", 3.0), ("nesterov", 3.0), ("heavyball", 0.5)):
    config = with_schedule(SolverConfig(rho=1.0, alpha=1.3, max_iters=400), schedule, r)
    errors = []
    run(prob, config, np.zeros((n, n)),
        callback=lambda st: errors.append(recovery_error(st.x, inst.X_star)))
    print(f"  {schedule:<10} {errors[100]:.2e}  {errors[-1]:.2e}")

# ---------------------------------------------------------------------------
# The recovered low-rank part has the right rank: singular values past q are
# at the level of the remaining optimization error.
config = SolverConfig(rho=1.0, alpha=1.3, max_iters=400)
X = run(prob, config, np.zeros((n, n))).final.x
print("\nleading singular values of the estimate:", np.round(svd(X).S[:q + 2], 6))
