"""Interaction energy per unit time of two charges at rest, as the smearing shrinks.

The per-unit-time rate is taken from two horizons, T and T/2, so the edge
effects cancel. Richardson extrapolation in sigma should land on c / (2 r).
"""

import numpy as np

from multitime import PhaseField, SystemParams, Trajectory, generalized_hamiltonian, make_grid, numeric_velocities
from multitime.checks import richardson_table, static_interaction_rate

c, r = 0.1, 1.0


def interaction(T, sigma, dt=0.025):
    g = make_grid(T, round(T / dt))
    params = SystemParams(coupling=c, T1=T, T2=T, sigma=sigma)
    zero = np.zeros((g.n_nodes, 1))
    ph1 = PhaseField(Trajectory.straight(g, [0.0], [0.0]), zero)
    ph2 = PhaseField(Trajectory.straight(g, [r], [r]), zero)
    return generalized_hamiltonian(ph1, ph2, params, numeric_velocities(ph1, ph2, params)) - 2 * T


sigmas = [0.2, 0.1, 0.05, 0.025]
rates = [(interaction(10.0, s) - interaction(5.0, s)) / 5.0 for s in sigmas]
for s, rate in zip(sigmas, rates):
    print(f"sigma {s:6.3f}: lattice {rate:.10f}   quadrature {c / 2 * static_interaction_rate(r, s):.10f}")
best = richardson_table(sigmas, rates)[-1][0]
print(f"\nextrapolated {best:.6f}, Coulomb c/(2r) = {c / (2 * r):.6f}")
