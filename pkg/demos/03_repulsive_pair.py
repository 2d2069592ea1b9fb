"""Two like charges pinned at x = -1 and x = +1 at both ends of a horizon T = 4.

The stationary paths come from Newton's method with continuation in the
coupling. Pinned ends plus an outward push mean the paths first drift inward.
The Newtonian Coulomb problem gives nearly the same paths, but the mid-time
displacement is 3/2 of the Newtonian value: at separation T/2 every retarded
and advanced partner sits at the horizon edge at mid-time, so half of the
Coulomb push is delivered as an impulse there.
"""

from multitime import Endpoints, SystemParams, coulomb_reference, make_grid, solve_el

params = SystemParams(coupling=0.01, T1=4.0, T2=4.0, sigma=0.05)
grids = (make_grid(4.0, 64), make_grid(4.0, 64))
ends = Endpoints(-1.0, -1.0, 1.0, 1.0)

sol = solve_el(ends, grids, params)
ref = coulomb_reference(ends, grids, params)
for rec in sol.trace:
    print(f"coupling {rec.coupling:.5f}: {rec.iterations} Newton steps, residual {rec.residual:.1e}")

print("\n   t      multi-time     Newtonian")
for j in range(0, 65, 8):
    print(f"{sol.traj1.t[j]:5.2f}   {sol.traj1.values[j, 0]:+.7f}   {ref.traj1.values[j, 0]:+.7f}")

bow, newton = sol.traj1.values[32, 0] + 1.0, ref.traj1.values[32, 0] + 1.0
print(f"\nmid-time displacement ratio {bow / newton:.4f} (impulse model: 1.5)")
