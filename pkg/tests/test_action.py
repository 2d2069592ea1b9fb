import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from multitime import (
    SystemParams,
    Trajectory,
    el_residual,
    fokker_action,
    make_grid,
    momentum_fields,
    numeric_functional_gradient,
    regularized_delta,
)
from multitime.checks import gradient_check
from multitime.errors import DomainError, InvalidRegularizationError, InvalidStepError, ValidationError

from conftest import wiggly_pair


@pytest.mark.parametrize("sigma", [0.5, 0.05, 0.002])
def test_regularized_delta_has_unit_mass_and_variance_sigma(sigma):
    s = math.sqrt(sigma)
    mass = quad(lambda u: regularized_delta(u, sigma), -40 * s, 40 * s, epsabs=1e-14)[0]
    var = quad(lambda u: u * u * regularized_delta(u, sigma), -40 * s, 40 * s, epsabs=1e-14)[0]
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert var == pytest.approx(sigma, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(v=st.floats(-0.95, 0.95), m=st.floats(0.1, 10.0), T=st.floats(0.5, 20.0))
def test_free_action_of_uniform_motion(v, m, T):
    g = make_grid(T, 16)
    t = Trajectory.straight(g, [0.0], [v * T])
    far = Trajectory.straight(g, [100.0], [100.0])
    b = fokker_action(t, far, SystemParams(m1=m, m2=1.0, coupling=0.0, T1=T, T2=T))
    assert b.free1 == pytest.approx(-m * T * math.sqrt(1 - v * v), rel=1e-12)
    assert b.interaction == 0.0


def test_free_momentum_is_relativistic():
    g = make_grid(2.0, 10)
    t1 = Trajectory.straight(g, [0.0, 0.0], [0.6, 0.8])
    t2 = Trajectory.straight(g, [5.0, 0.0], [5.0, 0.0])
    p1, p2 = momentum_fields(t1, t2, SystemParams(m1=2.0, coupling=0.0, T1=2.0, T2=2.0, dim=2))
    gamma = 1.0 / math.sqrt(1 - 0.5**2)
    np.testing.assert_allclose(p1, np.tile(2.0 * gamma * np.array([0.3, 0.4]), (11, 1)), rtol=1e-13)
    assert np.all(p2 == 0.0)


def test_interaction_matches_plain_double_sum():
    t1, t2 = wiggly_pair(n1=12, n2=9)
    params = SystemParams(coupling=0.3, T1=3.0, T2=2.5, sigma=0.2)
    v1 = np.gradient(t1.values[:, 0], t1.grid.dt, edge_order=2)
    v2 = np.gradient(t2.values[:, 0], t2.grid.dt, edge_order=2)
    total = 0.0
    for j in range(t1.grid.n_nodes):
        for k in range(t2.grid.n_nodes):
            s2 = (t1.t[j] - t2.t[k]) ** 2 - (t1.values[j, 0] - t2.values[k, 0]) ** 2
            rho = math.exp(-s2 * s2 / (2 * 0.2)) / math.sqrt(2 * math.pi * 0.2)
            total += t1.grid.weights[j] * t2.grid.weights[k] * rho * (1 - v1[j] * v2[k])
    assert fokker_action(t1, t2, params).interaction == pytest.approx(-0.15 * total, rel=1e-12)


def test_interaction_is_linear_in_coupling():
    t1, t2 = wiggly_pair()
    a = fokker_action(t1, t2, SystemParams(coupling=0.2, T1=3.0, T2=2.5)).interaction
    b = fokker_action(t1, t2, SystemParams(coupling=0.05, T1=3.0, T2=2.5)).interaction
    assert a == pytest.approx(4.0 * b, rel=1e-13)


def test_exchange_symmetry():
    t1, t2 = wiggly_pair(dim=2)
    params = SystemParams(m1=1.0, m2=1.7, coupling=0.1, T1=3.0, T2=2.5, dim=2)
    a = fokker_action(t1, t2, params)
    b = fokker_action(t2, t1, params.swapped())
    assert a.total == pytest.approx(b.total, rel=1e-14)
    ra, rb = el_residual(t1, t2, params), el_residual(t2, t1, params.swapped())
    np.testing.assert_allclose(ra.residual1, rb.residual2, atol=1e-14)
    np.testing.assert_allclose(ra.residual2, rb.residual1, atol=1e-14)


def test_straight_paths_are_stationary_without_coupling():
    t1, t2 = wiggly_pair()
    g1, g2 = t1.grid, t2.grid
    s1 = Trajectory.straight(g1, [0.0], [0.4])
    s2 = Trajectory.straight(g2, [1.0], [0.9])
    rep = el_residual(s1, s2, SystemParams(coupling=0.0, T1=3.0, T2=2.5))
    assert rep.sup_norm < 1e-13


@pytest.mark.parametrize("dim", [1, 3])
def test_analytic_derivatives_match_numeric(dim):
    t1, t2 = wiggly_pair(n1=32, n2=28, dim=dim, amp=0.03)
    params = SystemParams(m1=1.0, m2=2.0, coupling=0.15, T1=3.0, T2=2.5, sigma=0.05, dim=dim)
    for row in gradient_check(t1, t2, params):
        assert row.rel_error < 1e-6, row


def test_richardson_beats_plain_central_difference():
    t1, t2 = wiggly_pair(n1=24, n2=20)
    params = SystemParams(coupling=0.2, T1=3.0, T2=2.5, sigma=0.1)
    exact = momentum_fields(t1, t2, params)[0][1:-1]
    plain = numeric_functional_gradient("action", 1, t1, t2, params, h=1e-2, wrt="qdot")[1:-1]
    rich = numeric_functional_gradient("action", 1, t1, t2, params, h=1e-2, wrt="qdot", richardson=True)[1:-1]
    assert np.max(np.abs(rich - exact)) < 0.05 * np.max(np.abs(plain - exact))


def test_numeric_gradient_rejects_bad_step():
    t1, t2 = wiggly_pair()
    with pytest.raises(InvalidStepError):
        numeric_functional_gradient("action", 1, t1, t2, SystemParams(T1=3.0, T2=2.5), h=0.0)


def test_superluminal_path_raises_domain_error():
    g = make_grid(1.0, 10)
    fast = Trajectory.from_function(g, lambda t: 1.2 * t)
    slow = Trajectory.straight(g, [2.0], [2.0])
    with pytest.raises(DomainError) as info:
        fokker_action(fast, slow, SystemParams(coupling=0.1))
    assert all(v.code == "superluminal" for v in info.value.violations)


def test_error_precedence():
    g = make_grid(1.0, 10)
    fast = Trajectory.from_function(g, lambda t: 1.2 * t)
    slow = Trajectory.straight(g, [2.0], [2.0])
    with pytest.raises(DomainError):
        fokker_action(fast, slow, SystemParams(coupling=0.1, sigma=-1.0))
    with pytest.raises(InvalidRegularizationError):
        fokker_action(slow, slow, SystemParams(coupling=0.1, sigma=0.0))
    with pytest.raises(ValidationError):
        fokker_action(slow, slow, SystemParams(m1=0.0, coupling=0.1))
