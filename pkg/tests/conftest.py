import numpy as np
import pytest

from multitime import Endpoints, SystemParams, Trajectory, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def repulsive():
    """Two unit charges held near x = -1 and x = +1 over a horizon of 4."""
    params = SystemParams(m1=1.0, m2=1.0, coupling=0.01, T1=4.0, T2=4.0, sigma=0.05, dim=1)
    grids = (make_grid(4.0, 64), make_grid(4.0, 64))
    return Endpoints(-1.0, -1.0, 1.0, 1.0), grids, params


def wiggly_pair(n1=48, n2=40, T1=3.0, T2=2.5, dim=1, amp=0.05):
    """Deterministic smooth slower-than-light paths on unequal grids."""
    g1, g2 = make_grid(T1, n1), make_grid(T2, n2)
    k = np.arange(1, dim + 1)
    t1 = Trajectory.from_function(
        g1, lambda t: -0.6 + 0.1 * t[:, None] * k + amp * np.sin(np.pi * t[:, None] / T1 * k)
    )
    t2 = Trajectory.from_function(
        g2, lambda t: 0.7 - 0.05 * t[:, None] * k + amp * np.sin(2 * np.pi * t[:, None] / T2) * k
    )
    return t1, t2
