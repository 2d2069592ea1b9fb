import math

import numpy as np
import pytest

from multitime import (
    PhaseField,
    SystemParams,
    canonical_action,
    el_residual,
    first_order_hamiltonian,
    fokker_action,
    generalized_hamiltonian,
    momentum_fields,
    numeric_velocities,
    perturbative_velocities,
    recover_momenta,
    stationarity_residuals,
)
from multitime.canonical import VelocitySolution
from multitime.errors import DimensionError, DivergenceError

from conftest import wiggly_pair

T1, T2 = 3.0, 2.5


def phases(params, dim=1):
    t1, t2 = wiggly_pair(n1=40, n2=36, dim=dim)
    p1, p2 = momentum_fields(t1, t2, params)
    return PhaseField(t1, p1), PhaseField(t2, p2)


def test_exact_elimination_recovers_the_momenta():
    params = SystemParams(m1=1.0, m2=1.4, coupling=0.1, T1=T1, T2=T2, sigma=0.05, dim=2)
    ph1, ph2 = phases(params, dim=2)
    sol = numeric_velocities(ph1, ph2, params)
    assert sol.converged and sol.contraction_bound < 1
    r1, r2 = recover_momenta(ph1, ph2, params, sol)
    np.testing.assert_allclose(r1, ph1.p, atol=1e-12)
    np.testing.assert_allclose(r2, ph2.p, atol=1e-12)
    # the momenta came from the paths' own velocities
    np.testing.assert_allclose(sol.F1, np.gradient(ph1.q.values, ph1.grid.dt, axis=0, edge_order=2), atol=1e-11)


@pytest.mark.parametrize("c", [0.0, 0.01, 0.05, 0.1, -0.1])
def test_legendre_identity_with_exact_elimination(c):
    params = SystemParams(coupling=c, T1=T1, T2=T2)
    ph1, ph2 = phases(params)
    original = fokker_action(ph1.q, ph2.q, params).total
    assert canonical_action(ph1, ph2, params) == pytest.approx(original, rel=1e-12)


def test_hamiltonian_without_coupling_is_free_energy():
    params = SystemParams(m1=1.3, coupling=0.0, T1=T1, T2=T2)
    ph1, ph2 = phases(params)
    E = sum(
        float(np.sum(ph.grid.weights * np.sqrt(np.sum(ph.p**2, axis=1) + m * m)))
        for ph, m in ((ph1, 1.3), (ph2, 1.0))
    )
    sol = numeric_velocities(ph1, ph2, params)
    assert generalized_hamiltonian(ph1, ph2, params, sol) == pytest.approx(E, rel=1e-13)
    assert first_order_hamiltonian(ph1, ph2, params) == pytest.approx(E, rel=1e-13)


def test_perturbative_errors_shrink_quadratically():
    errs = []
    for c in (0.04, 0.02, 0.01):
        params = SystemParams(coupling=c, T1=T1, T2=T2)
        ph1, ph2 = phases(params)
        pert = perturbative_velocities(ph1, ph2, params)
        r1, _ = recover_momenta(ph1, ph2, params, pert)
        errs.append(np.max(np.abs(r1 - ph1.p)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


def test_first_order_hamiltonian_is_legendre_of_perturbative_velocities():
    gaps = []
    for c in (0.02, 0.01):
        params = SystemParams(coupling=c, T1=T1, T2=T2)
        ph1, ph2 = phases(params)
        H = generalized_hamiltonian(ph1, ph2, params, perturbative_velocities(ph1, ph2, params))
        gaps.append(abs(H - first_order_hamiltonian(ph1, ph2, params)))
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.05)


def test_strong_coupling_is_rejected_as_non_contractive():
    params = SystemParams(coupling=400.0, T1=T1, T2=T2, sigma=0.05)
    t1, t2 = wiggly_pair(n1=40, n2=36)
    ph1 = PhaseField(t1, np.full((41, 1), 0.1))
    ph2 = PhaseField(t2, np.full((37, 1), -0.1))
    with pytest.raises(DivergenceError) as info:
        numeric_velocities(ph1, ph2, params)
    assert info.value.history


def test_hamiltonian_rejects_mismatched_velocities():
    params = SystemParams(coupling=0.1, T1=T1, T2=T2)
    ph1, ph2 = phases(params)
    bad = VelocitySolution(np.zeros((5, 1)), np.zeros((37, 1)), "manual")
    with pytest.raises(DimensionError):
        generalized_hamiltonian(ph1, ph2, params, bad)


def test_unknown_hamiltonian_mode():
    params = SystemParams(coupling=0.1, T1=T1, T2=T2)
    ph1, ph2 = phases(params)
    with pytest.raises(ValueError):
        canonical_action(ph1, ph2, params, hamiltonian="second_order")


def test_canonical_residuals_mirror_the_euler_lagrange_residual():
    """Away from a solution, qdot = dH/dp still holds and pdot + dH/dq is minus the EL residual."""
    params = SystemParams(coupling=0.1, T1=T1, T2=T2)
    ph1, ph2 = phases(params)
    rep = stationarity_residuals(ph1, ph2, params, richardson=True)
    el = el_residual(ph1.q, ph2.q, params)
    assert rep.q_sup_norm < 1e-8
    np.testing.assert_allclose(rep.p_residual1[1:-1], -el.residual1[1:-1], atol=1e-8)
    np.testing.assert_allclose(rep.p_residual2[1:-1], -el.residual2[1:-1], atol=1e-8)
    assert el.sup_norm > 1e-3
