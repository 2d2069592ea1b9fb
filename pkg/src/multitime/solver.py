"""Fixed-endpoint stationary trajectories of the discretized two-charge action.

The stationary point is a saddle of the action, so the solver does root finding
on the Euler-Lagrange residual (damped Newton with a finite-difference
Jacobian) rather than minimization. The interacting problem is reached by
continuation in the coupling, starting from the free straight lines.

:func:`coulomb_reference` is an independent Newtonian oracle used to check the
nonrelativistic regime.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from . import parallel
from .action import ResidualReport, el_residual
from .errors import (
    DivergenceError,
    DomainError,
    NoTimelikePathError,
    SingularSystemError,
    ValidationError,
)
from .trajectory import SystemParams, TimeGrid, Trajectory

__all__ = [
    "Endpoints",
    "SolveConfig",
    "ContinuationRecord",
    "Solution",
    "solve_free",
    "solve_el",
    "coulomb_reference",
]

log = logging.getLogger(__name__)

JACOBIAN_MODES = ("finite-difference", "analytic-if-available")


@dataclass(frozen=True)
class Endpoints:
    """Fixed positions of both particles at the start and end of their horizons."""

    q1_0: np.ndarray
    q1_T: np.ndarray
    q2_0: np.ndarray
    q2_T: np.ndarray

    def __post_init__(self):
        for name in ("q1_0", "q1_T", "q2_0", "q2_T"):
            a = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        dims = {a.shape for a in (self.q1_0, self.q1_T, self.q2_0, self.q2_T)}
        if len(dims) != 1:
            raise ValueError(f"endpoint vectors disagree in dimension: {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.q1_0.shape[0]

    def swapped(self) -> "Endpoints":
        return Endpoints(self.q2_0, self.q2_T, self.q1_0, self.q1_T)


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-8
    max_iter: int = 30
    continuation_steps: int = 4
    jacobian: str = "finite-difference"
    damping: float = 1.0
    max_bisections: int = 6

    def __post_init__(self):
        problems = []
        if not self.tol > 0:
            problems.append(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            problems.append(f"max_iter must be >= 1, got {self.max_iter}")
        if int(self.continuation_steps) < 1:
            problems.append(f"continuation_steps must be >= 1, got {self.continuation_steps}")
        if not 0.0 < self.damping <= 1.0:
            problems.append(f"damping must lie in (0, 1], got {self.damping}")
        if self.jacobian not in JACOBIAN_MODES:
            problems.append(f"jacobian must be one of {JACOBIAN_MODES}, got {self.jacobian!r}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class ContinuationRecord:
    coupling: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class Solution:
    traj1: Trajectory
    traj2: Trajectory
    report: ResidualReport | None
    trace: tuple = ()
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "report": None if self.report is None else self.report.to_dict(),
            "trace": [
                {"coupling": r.coupling, "iterations": r.iterations, "residual": r.residual}
                for r in self.trace
            ],
            "meta": dict(self.meta),
        }


def _check_timelike(endpoints: Endpoints, grids) -> None:
    for a, (q0, qT, g) in enumerate(
        ((endpoints.q1_0, endpoints.q1_T, grids[0]), (endpoints.q2_0, endpoints.q2_T, grids[1])), 1
    ):
        speed = float(np.linalg.norm(qT - q0)) / g.T
        if speed >= 1.0:
            raise NoTimelikePathError(
                f"particle {a}: endpoints need mean speed {speed:.6g} >= 1; no timelike path"
            )


def _free_paths(endpoints: Endpoints, grids) -> tuple[Trajectory, Trajectory]:
    _check_timelike(endpoints, grids)
    return (
        Trajectory.straight(grids[0], endpoints.q1_0, endpoints.q1_T),
        Trajectory.straight(grids[1], endpoints.q2_0, endpoints.q2_T),
    )


def solve_free(endpoints: Endpoints, grids: tuple[TimeGrid, TimeGrid], params: SystemParams) -> Solution:
    """Straight constant-velocity paths: the stationary point at zero coupling."""
    t1, t2 = _free_paths(endpoints, grids)
    report = el_residual(t1, t2, replace(params, coupling=0.0))
    return Solution(t1, t2, report, (ContinuationRecord(0.0, 0, report.sup_norm),), {"method": "free"})


class _Unknowns:
    """Packs the interior nodes of both paths into one vector."""

    def __init__(self, traj1: Trajectory, traj2: Trajectory):
        self.t1, self.t2 = traj1, traj2
        self.n1 = traj1.values[1:-1].size
        self.shape1 = traj1.values[1:-1].shape
        self.shape2 = traj2.values[1:-1].shape

    def pack(self, traj1: Trajectory, traj2: Trajectory) -> np.ndarray:
        return np.concatenate([traj1.values[1:-1].ravel(), traj2.values[1:-1].ravel()])

    def unpack(self, x: np.ndarray) -> tuple[Trajectory, Trajectory]:
        v1 = self.t1.values.copy()
        v2 = self.t2.values.copy()
        v1[1:-1] = x[: self.n1].reshape(self.shape1)
        v2[1:-1] = x[self.n1 :].reshape(self.shape2)
        return self.t1.with_values(v1), self.t2.with_values(v2)

    def residual(self, x: np.ndarray, params: SystemParams) -> np.ndarray:
        rep = el_residual(*self.unpack(x), params)
        return np.concatenate([rep.residual1[1:-1].ravel(), rep.residual2[1:-1].ravel()])


def _jacobian(u: _Unknowns, x: np.ndarray, params: SystemParams) -> np.ndarray:
    def column(i):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        return (u.residual(xp, params) - u.residual(xm, params)) / (xp[i] - xm[i])

    return np.column_stack(parallel.map_ordered(column, range(x.size)))


def _newton(u: _Unknowns, x: np.ndarray, params: SystemParams, config: SolveConfig):
    history = []
    for it in range(config.max_iter + 1):
        r = u.residual(x, params)
        nr = float(np.max(np.abs(r)))
        history.append(nr)
        if not np.isfinite(nr):
            raise DivergenceError(f"non-finite residual at coupling {params.coupling}", history)
        if nr <= config.tol:
            return x, it, nr
        if it == config.max_iter:
            break
        J = _jacobian(u, x, params)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular Jacobian at coupling {params.coupling}") from exc
        if not np.all(np.isfinite(dx)):
            raise SingularSystemError(f"singular Jacobian at coupling {params.coupling}")
        step = config.damping
        for _ in range(20):
            trial = x + step * dx
            try:
                u.residual(trial, params)
            except DomainError:
                step *= 0.5
                continue
            break
        else:
            raise DivergenceError(f"Newton step leaves the light cone at coupling {params.coupling}", history)
        x = trial
    raise DivergenceError(
        f"Newton did not reach tol {config.tol:g} in {config.max_iter} iterations "
        f"at coupling {params.coupling}",
        history,
    )


def solve_el(
    endpoints: Endpoints,
    grids: tuple[TimeGrid, TimeGrid],
    params: SystemParams,
    config: SolveConfig | None = None,
) -> Solution:
    """Stationary paths of the regularized action with fixed endpoints.

    The coupling is raised geometrically, ``c_k = c * 2**(k - K)`` for
    ``k = 1..K`` (``K = config.continuation_steps``), each stage starting from the
    previous solution. A stage that fails is retried at the midpoint between the
    last converged coupling and the failing one, at most ``config.max_bisections``
    times in total. The returned residual is re-evaluated, not taken from Newton.
    """
    config = config or SolveConfig()
    t1, t2 = _free_paths(endpoints, grids)
    u = _Unknowns(t1, t2)
    x = u.pack(t1, t2)

    target = params.coupling
    K = int(config.continuation_steps)
    if target == 0.0:
        schedule = [0.0]
    else:
        schedule = [target * 2.0 ** (k - K) for k in range(1, K + 1)]
        schedule[-1] = target

    trace: list[ContinuationRecord] = []
    done = 0.0
    bisections = 0
    while schedule:
        c = schedule[0]
        try:
            x_new, its, res = _newton(u, x, replace(params, coupling=c), config)
        except (DivergenceError, SingularSystemError, DomainError) as exc:
            if bisections >= config.max_bisections:
                raise DivergenceError(
                    f"continuation failed at coupling {c} after {bisections} bisections: {exc}",
                    [(r.coupling, r.iterations, r.residual) for r in trace],
                ) from exc
            bisections += 1
            log.info("stage at coupling %g failed (%s); bisecting", c, exc)
            schedule.insert(0, 0.5 * (done + c))
            continue
        x = x_new
        trace.append(ContinuationRecord(c, its, res))
        done = c
        schedule.pop(0)

    traj1, traj2 = u.unpack(x)
    report = el_residual(traj1, traj2, params)
    if report.sup_norm > config.tol:
        raise DivergenceError(
            f"final residual {report.sup_norm:g} exceeds tol {config.tol:g}",
            [(r.coupling, r.iterations, r.residual) for r in trace],
        )
    return Solution(traj1, traj2, report, tuple(trace), {"method": "newton-continuation", "bisections": bisections})


def coulomb_reference(
    endpoints: Endpoints,
    grids: tuple[TimeGrid, TimeGrid],
    params: SystemParams,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> Solution:
    """Newtonian two-body boundary-value problem with ``V(r) = (c/2) / r``.

    Solved by shooting on the initial velocities with an adaptive explicit
    Runge-Kutta integrator (DOP853). Both particles share one time axis, so
    the horizons must agree. Only used as an oracle for the relativistic solver.
    """
    g1, g2 = grids
    if not np.isclose(g1.T, g2.T, rtol=1e-12, atol=0.0):
        raise ValidationError([], f"Newtonian reference needs T1 == T2, got {g1.T} and {g2.T}")
    T = g1.T
    d = endpoints.dim
    m1, m2, k = params.m1, params.m2, params.coupling / 2.0

    def rhs(_t, y):
        x1, x2, u1, u2 = y[:d], y[d : 2 * d], y[2 * d : 3 * d], y[3 * d :]
        r = x1 - x2
        f = k * r / np.linalg.norm(r) ** 3
        return np.concatenate([u1, u2, f / m1, -f / m2])

    def integrate(u0, t_eval=None):
        y0 = np.concatenate([endpoints.q1_0, endpoints.q2_0, u0])
        return solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval)

    target = np.concatenate([endpoints.q1_T, endpoints.q2_T])

    def miss(u0):
        sol = integrate(u0)
        if not sol.success:
            return np.full(2 * d, 1e3)
        return sol.y[: 2 * d, -1] - target

    guess = np.concatenate([(endpoints.q1_T - endpoints.q1_0) / T, (endpoints.q2_T - endpoints.q2_0) / T])
    res = root(miss, guess, method="hybr", options={"xtol": 1e-14})
    final_miss = float(np.max(np.abs(miss(res.x))))
    if final_miss > 1e-9:
        raise DivergenceError(f"shooting did not converge (boundary miss {final_miss:g})", [final_miss])

    out1 = integrate(res.x, g1.nodes)
    out2 = out1 if g2.n_steps == g1.n_steps else integrate(res.x, g2.nodes)
    x1 = out1.y[:d].T
    x2 = out2.y[d : 2 * d].T

    dense = integrate(res.x, np.linspace(0.0, T, 2001))
    y = dense.y
    kin = 0.5 * m1 * np.sum(y[2 * d : 3 * d] ** 2, axis=0) + 0.5 * m2 * np.sum(y[3 * d :] ** 2, axis=0)
    pot = k / np.linalg.norm(y[:d] - y[d : 2 * d], axis=0)
    energy = kin + pot
    drift = float(np.max(np.abs(energy - energy[0])) / max(np.max(np.abs(kin) + np.abs(pot)), 1e-300))

    meta = {
        "method": "newtonian-shooting",
        "boundary_miss": final_miss,
        "energy_drift": drift,
        "initial_velocities": res.x.tolist(),
        "min_separation": float(np.min(np.linalg.norm(y[:d] - y[d : 2 * d], axis=0))),
    }
    return Solution(Trajectory(g1, x1), Trajectory(g2, x2), None, (), meta)
