import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multitime import SystemParams, Trajectory, make_grid, read_trajectory_csv, validate, velocity, write_trajectory_csv
from multitime.errors import InsufficientResolutionError, InvalidGridError
from multitime.trajectory import time_derivative

from conftest import wiggly_pair


def test_grid_nodes_and_trapezoid_weights():
    g = make_grid(2.0, 8)
    assert g.n_nodes == 9
    assert g.dt == 0.25
    np.testing.assert_allclose(g.nodes, np.linspace(0, 2, 9), rtol=0, atol=1e-15)
    assert g.weights[0] == g.weights[-1] == 0.125
    assert np.sum(g.weights) == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("T,n", [(0.0, 10), (-1.0, 10), (1.0, 1), (np.inf, 4)])
def test_make_grid_rejects_bad_input(T, n):
    with pytest.raises(InvalidGridError):
        make_grid(T, n)


def test_derivative_stencil_is_exact_on_quadratics():
    g = make_grid(1.3, 7)
    q = 0.2 + 0.4 * g.nodes - 0.3 * g.nodes**2
    np.testing.assert_allclose(time_derivative(q[:, None], g.dt)[:, 0], 0.4 - 0.6 * g.nodes, atol=1e-13)


def test_derivative_needs_three_nodes():
    with pytest.raises(InsufficientResolutionError):
        time_derivative(np.zeros((2, 1)), 0.1)


def test_values_are_read_only():
    t = Trajectory.straight(make_grid(1.0, 4), [0.0], [0.5])
    with pytest.raises(ValueError):
        t.values[1, 0] = 3.0


def test_validate_collects_every_violation():
    g = make_grid(1.0, 10)
    fast = Trajectory.from_function(g, lambda t: 1.5 * t)
    slow = Trajectory.straight(g, [0.0], [0.1])
    bad = SystemParams(m1=-1.0, m2=1.0, coupling=0.1, T1=1.0, T2=1.0, sigma=0.0)
    codes = [v.code for v in validate(bad, fast, slow)]
    assert codes.count("invalid-mass") == 1
    assert "invalid-regularization" in codes
    superluminal = [v for v in validate(bad, fast, slow) if v.code == "superluminal"]
    assert len(superluminal) == g.n_nodes and all(v.particle == 1 for v in superluminal)


def test_validate_flags_grid_and_dimension_mismatch():
    t1, t2 = wiggly_pair()
    params = SystemParams(coupling=0.1, T1=3.0, T2=9.0, dim=2)
    codes = {v.code for v in validate(params, t1, t2)}
    assert {"grid-mismatch", "dimension-mismatch"} <= codes


def test_validate_accepts_good_pair():
    t1, t2 = wiggly_pair()
    assert validate(SystemParams(coupling=0.1, T1=3.0, T2=2.5), t1, t2) == []


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 30),
    T=st.floats(0.1, 50.0),
    dim=st.integers(1, 3),
    seed=st.integers(0, 2**32 - 1),
)
def test_csv_round_trip_is_exact(tmp_path_factory, n, T, dim, seed):
    g = make_grid(T, n)
    vals = np.random.default_rng(seed).normal(size=(n + 1, dim))
    traj = Trajectory(g, vals)
    path = tmp_path_factory.mktemp("csv") / "traj.csv"
    write_trajectory_csv(traj, path)
    back = read_trajectory_csv(path)
    assert back.grid.n_steps == n
    assert np.array_equal(back.values, traj.values)
    np.testing.assert_allclose(back.grid.T, T, rtol=1e-15)


def test_velocity_of_straight_path_is_constant():
    t = Trajectory.straight(make_grid(2.0, 5), [0.0, 1.0], [1.0, 0.0])
    np.testing.assert_allclose(velocity(t), np.tile([0.5, -0.5], (6, 1)), atol=1e-15)
