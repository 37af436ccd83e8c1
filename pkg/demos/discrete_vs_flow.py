"""
How closely ADMM iterates track their flow
==========================================

Placing iterate ``k`` at time ``k / rho`` (or ``k / sqrt(rho)`` with
momentum) lines the iterates up with the continuous flow started at
``x_0``. The sup-norm distance shrinks as ``rho`` grows. For relaxed
iterations the flow to compare against uses the mass coefficient
``1 / alpha``, which is what ``limit_alpha`` supplies. The script ends with
the fitted decay rates of the three flows.
"""

from admmflow import SolverConfig, discrete_flow_gap, limit_alpha, standard_quadratic
from admmflow.cli import rate_rows
from admmflow.problems import STANDARD_X0

import numpy as np

inst, problem = standard_quadratic()
oracle = inst.oracle(epsilon=1e-4)
# x_0 should equal the flow's starting point, so start z at A x0
z_init = inst.A @ np.array(STANDARD_X0)

# ---------------------------------------------------------------------------
print("sup_t |x_k - X(t_k)| on [0, 2]")
print(f"  {'alpha':<6}{'schedule':<11}{'flow alpha':<12}"
      + "".join(f"rho={rho:<8g}" for rho in (1e2, 1e3, 1e4)))
for alpha in (1.0, 1.35):
    for schedule, r in (("none", 3.0), ("nesterov", 3.0), ("heavyball", 1.0)):
        for label, flow_alpha in (("alpha", alpha), ("2 - 1/alpha", limit_alpha(alpha))):
            if alpha == 1.0 and label != "alpha":
                continue
            gaps = [discrete_flow_gap(problem, SolverConfig(rho=rho, alpha=alpha,
                                                            schedule=schedule, r=r),
                                      oracle, inst.A, z_init, 2.0, flow_alpha=flow_alpha)
                    for rho in (1e2, 1e3, 1e4)]
            print(f"  {alpha:<6}{schedule:<11}{label:<12}"
                  + "".join(f"{g:<12.2e}" for g in gaps))

# ---------------------------------------------------------------------------
print("\nfitted decay rates of the flows on [1, 10]")
for row in rate_rows():
    print(f"  {row['flow']:<12}{row['setting']:<17}{row['model']:<12}"
          f"predicted {row['predicted']:+.3f}  fitted {row['fitted']:+.3f}  {row['pass']}")
