"""Time grids, discretized particle paths and the checks shared by every module.

Units are natural (c = 1). Each particle carries its own time axis
``t_a in [0, T_a]`` sampled on a uniform grid.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientResolutionError, InvalidGridError

__all__ = [
    "TimeGrid",
    "Trajectory",
    "PhaseField",
    "SystemParams",
    "Violation",
    "make_grid",
    "velocity",
    "time_derivative",
    "validate",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "trajectory_to_csv",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.dt

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights on the nodes."""
        w = np.full(self.n_nodes, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def make_grid(T: float, n: int) -> TimeGrid:
    """Uniform grid with ``n + 1`` nodes spanning ``[0, T]``."""
    if not np.isfinite(T) or T <= 0:
        raise InvalidGridError(f"horizon must be positive, got T={T}")
    if int(n) != n or n < 2:
        raise InvalidGridError(f"need at least 2 steps, got n={n}")
    return TimeGrid(float(T), int(n))


@dataclass(frozen=True)
class Trajectory:
    """Path ``q_a(t_j)`` stored as an ``(n_nodes, dim)`` array."""

    grid: TimeGrid
    values: np.ndarray
    endpoint_fixed: tuple = (True, True)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_nodes:
            raise InvalidGridError(
                f"values of shape {np.shape(self.values)} do not match "
                f"{self.grid.n_nodes} grid nodes"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "endpoint_fixed", tuple(bool(x) for x in self.endpoint_fixed))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "Trajectory":
        return Trajectory(self.grid, values, self.endpoint_fixed)

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "Trajectory":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float).reshape(grid.n_nodes, -1))

    @classmethod
    def straight(cls, grid: TimeGrid, q0, qT) -> "Trajectory":
        q0 = np.atleast_1d(np.asarray(q0, dtype=float))
        qT = np.atleast_1d(np.asarray(qT, dtype=float))
        s = grid.nodes[:, None] / grid.T
        return cls(grid, q0[None, :] * (1.0 - s) + qT[None, :] * s)


@dataclass(frozen=True)
class PhaseField:
    q: Trajectory
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape != self.q.values.shape:
            raise InvalidGridError(
                f"momentum shape {p.shape} does not match coordinates {self.q.values.shape}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def grid(self) -> TimeGrid:
        return self.q.grid


@dataclass(frozen=True)
class SystemParams:
    """Physical and regularization parameters of the two-charge system.

    ``coupling`` is the product e1*e2; positive values repel.
    Construction never fails so that :func:`validate` can report everything.
    """

    m1: float = 1.0
    m2: float = 1.0
    coupling: float = 0.0
    T1: float = 1.0
    T2: float = 1.0
    sigma: float = 0.05
    dim: int = 1

    def mass(self, a: int) -> float:
        return self.m1 if a == 1 else self.m2

    def horizon(self, a: int) -> float:
        return self.T1 if a == 1 else self.T2

    def swapped(self) -> "SystemParams":
        return SystemParams(self.m2, self.m1, self.coupling, self.T2, self.T1, self.sigma, self.dim)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    particle: int | None = None
    node: int | None = None
    details: dict = field(default_factory=dict, compare=False)


def time_derivative(f: np.ndarray, dt: float) -> np.ndarray:
    """Second-order finite-difference derivative along axis 0.

    Central differences inside, one-sided three-point stencils at both ends.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] < 3:
        raise InsufficientResolutionError(f"need at least 3 nodes, got {f.shape[0]}")
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * dt)
    return out


def velocity(traj: Trajectory) -> np.ndarray:
    """Velocity field of a trajectory, same shape as ``traj.values``."""
    return time_derivative(traj.values, traj.grid.dt)


def validate(params: SystemParams, traj1: Trajectory, traj2: Trajectory) -> list[Violation]:
    """Collect every invariant violation; an empty list means the inputs are usable."""
    out: list[Violation] = []
    for name in ("m1", "m2"):
        m = getattr(params, name)
        if not np.isfinite(m) or m <= 0:
            out.append(Violation("invalid-mass", f"{name} must be positive, got {m}"))
    for name in ("T1", "T2"):
        T = getattr(params, name)
        if not np.isfinite(T) or T <= 0:
            out.append(Violation("invalid-horizon", f"{name} must be positive, got {T}"))
    if not np.isfinite(params.sigma) or params.sigma <= 0:
        out.append(
            Violation("invalid-regularization", f"sigma must be positive, got {params.sigma}")
        )
    if not np.isfinite(params.coupling):
        out.append(Violation("invalid-coupling", f"coupling must be finite, got {params.coupling}"))
    for a, traj in ((1, traj1), (2, traj2)):
        if traj.dim != params.dim:
            out.append(
                Violation(
                    "dimension-mismatch",
                    f"particle {a} has dimension {traj.dim}, params say {params.dim}",
                    particle=a,
                )
            )
        T = params.horizon(a)
        if not np.isclose(traj.grid.T, T, rtol=1e-12, atol=0.0):
            out.append(
                Violation(
                    "grid-mismatch",
                    f"particle {a} grid spans [0, {traj.grid.T}] but T{a}={T}",
                    particle=a,
                )
            )
        if not np.all(np.isfinite(traj.values)):
            out.append(Violation("non-finite", f"particle {a} has non-finite coordinates", particle=a))
            continue
        if traj.grid.n_nodes < 3:
            out.append(
                Violation("insufficient-resolution", f"particle {a} has fewer than 3 nodes", particle=a)
            )
            continue
        speed = np.sqrt(np.sum(velocity(traj) ** 2, axis=1))
        for j in np.flatnonzero(speed >= 1.0):
            out.append(
                Violation(
                    "superluminal",
                    f"particle {a} node {j}: |v| = {speed[j]:.6g} >= 1",
                    particle=a,
                    node=int(j),
                    details={"speed": float(speed[j])},
                )
            )
    return out


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    header = ["t"] + [f"q{i + 1}" for i in range(traj.dim)]
    buf.write(",".join(header) + "\n")
    for t, row in zip(traj.t, traj.values):
        buf.write(",".join(format(float(x), ".17g") for x in (t, *row)) + "\n")
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    Path(path).write_text(trajectory_to_csv(traj), encoding="utf-8")


def read_trajectory_csv(path) -> Trajectory:
    """Read the ``t,q1[,q2,q3]`` format; the grid is rebuilt from the time column."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    if header[0] != "t" or header[1:] != [f"q{i + 1}" for i in range(len(header) - 1)]:
        raise InvalidGridError(f"unexpected trajectory header {header}")
    if not 2 <= len(header) <= 4:
        raise InvalidGridError("trajectory must have 1 to 3 spatial columns")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    t = data[:, 0]
    grid = make_grid(t[-1], len(t) - 1)
    if not np.allclose(t, grid.nodes, rtol=0, atol=1e-9 * max(1.0, grid.T)):
        raise InvalidGridError("time column is not a uniform grid starting at 0")
    return Trajectory(grid, data[:, 1:])
