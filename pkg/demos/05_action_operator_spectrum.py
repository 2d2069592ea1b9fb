"""Eigenvalues of the lattice action operator and how they move with sigma and T.

One free time slice per particle, 24 grid points each: a 576-state problem.
"""

import numpy as np

from multitime import LatticeSpec, SystemParams, build_action_operator, build_lattice, lowest_eigenvalues, stationarity_scan

params = SystemParams(m1=1.0, m2=1.0, coupling=0.2, T1=1.0, T2=1.0, sigma=0.05)
spec = LatticeSpec(nt=2, nq=24, q1_0=-0.5, q1_T=-0.3, q2_0=0.5, q2_T=0.5)

op = build_action_operator(build_lattice(spec), params)
res = lowest_eigenvalues(op, k=4)
print("smallest-magnitude eigenvalues:", np.array2string(res.eigenvalues, precision=6))
print("Ritz residuals:               ", np.array2string(res.residual_norms, precision=1))

for name, values in (("sigma", np.linspace(0.05, 0.5, 6)), ("T", np.linspace(0.5, 3.0, 6))):
    scan = stationarity_scan(spec, params, name, values, k=2)
    print(f"\nscan over {name}")
    print(scan.to_csv().strip())
    print("sign changes of the derivative:", scan.candidates or "none")
