"""Evaluate the regularized two-charge action and check its derivatives.

Two slightly wiggling paths are built around fixed endpoints. The analytic
momenta and Euler-Lagrange residuals are compared with central differences of
the discretized action itself.
"""

import numpy as np

from multitime import Endpoints, SystemParams, fokker_action, make_grid
from multitime.checks import gradient_check, random_smooth_pair

params = SystemParams(m1=1.0, m2=1.3, coupling=0.1, T1=4.0, T2=4.0, sigma=0.05)
ends = Endpoints(-1.0, -0.6, 1.0, 0.7)
grids = (make_grid(4.0, 64), make_grid(4.0, 64))
t1, t2 = random_smooth_pair(ends, grids, np.random.default_rng(0), amplitude=0.1)

b = fokker_action(t1, t2, params)
print(f"free parts     {b.free1:+.10f}  {b.free2:+.10f}")
print(f"interaction    {b.interaction:+.10f}")
print(f"total          {b.total:+.10f}\n")

print("quantity      particle  relative error")
for row in gradient_check(t1, t2, params):
    print(f"{row.quantity:<13} {row.particle:>8}  {row.rel_error:.2e}")
