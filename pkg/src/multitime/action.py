"""Regularized two-charge Fokker action, its momenta and Euler-Lagrange residuals.

The discretized action is

    I = -m1 sum_j w1_j sqrt(1 - v1_j^2) - m2 sum_k w2_k sqrt(1 - v2_k^2)
        - (c/2) sum_jk w1_j w2_k rho(s_jk) (1 - v1_j . v2_k)

with trapezoid weights ``w``, ``s_jk = (t1_j - t2_k)^2 - |q1_j - q2_k|^2`` and
``rho`` the Gaussian regularization of the light-cone delta. ``c = e1 e2``;
with this sign a positive coupling is a repulsive (like-charge) interaction.

Functional derivatives are nodal partial derivatives divided by the
quadrature weight of the node, treating coordinates and velocities as
independent variables.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import parallel
from .errors import (
    DomainError,
    InvalidRegularizationError,
    InvalidStepError,
    ValidationError,
)
from .trajectory import (
    SystemParams,
    Trajectory,
    Violation,
    time_derivative,
    validate,
    velocity,
)

__all__ = [
    "ActionBreakdown",
    "ResidualReport",
    "regularized_delta",
    "fokker_action",
    "momentum_fields",
    "el_residual",
    "numeric_functional_gradient",
    "numeric_el_residual",
    "require_valid",
]


@dataclass(frozen=True)
class ActionBreakdown:
    free1: float
    free2: float
    interaction: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ResidualReport:
    residual1: np.ndarray
    residual2: np.ndarray
    sup_norm: float
    l2_norm: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "residual1": self.residual1.tolist(),
            "residual2": self.residual2.tolist(),
            "sup_norm": self.sup_norm,
            "l2_norm": self.l2_norm,
            "metadata": dict(self.metadata),
        }


def regularized_delta(u, sigma: float):
    """Gaussian stand-in for ``delta(u)``: ``exp(-u^2 / (2 sigma)) / sqrt(2 pi sigma)``.

    ``sigma`` is the variance in ``u`` (squared-interval units).
    """
    if not np.isfinite(sigma) or sigma <= 0:
        raise InvalidRegularizationError(
            [Violation("invalid-regularization", f"sigma must be positive, got {sigma}")]
        )
    u = np.asarray(u, dtype=float)
    out = np.exp(-(u * u) / (2.0 * sigma)) / math.sqrt(2.0 * math.pi * sigma)
    return float(out) if out.ndim == 0 else out


def require_valid(params: SystemParams, traj1: Trajectory, traj2: Trajectory) -> None:
    """Raise the most specific error for any violation found by ``validate``."""
    found = validate(params, traj1, traj2)
    if not found:
        return
    codes = {v.code for v in found}
    if "superluminal" in codes:
        raise DomainError(found)
    if "invalid-regularization" in codes:
        raise InvalidRegularizationError(found)
    raise ValidationError(found)


# -- kernels on raw arrays -------------------------------------------------


def _check_speed(v: np.ndarray, particle: int) -> np.ndarray:
    v2 = np.sum(v * v, axis=1)
    bad = np.flatnonzero(~(v2 < 1.0))
    if bad.size:
        raise DomainError(
            [
                Violation(
                    "superluminal",
                    f"particle {particle} node {j}: |v|^2 = {v2[j]:.6g} >= 1",
                    particle=particle,
                    node=int(j),
                )
                for j in bad
            ]
        )
    return v2


def _free_action(m: float, w: np.ndarray, v: np.ndarray, particle: int) -> float:
    v2 = _check_speed(v, particle)
    return -m * math.fsum(w * np.sqrt(1.0 - v2))


def _pair(t_s, q_s, t_o, q_o):
    """Squared intervals ``s[j, k]`` and separations ``q_s[j] - q_o[k]``."""
    dt = t_s[:, None] - t_o[None, :]
    dq = q_s[:, None, :] - q_o[None, :, :]
    return dt * dt - np.sum(dq * dq, axis=-1), dq


def _vdot(v_s, v_o):
    return np.sum(v_s[:, None, :] * v_o[None, :, :], axis=-1)


def _interaction(coupling, sigma, t1, q1, v1, w1, t2, q2, v2, w2) -> float:
    if coupling == 0.0:
        return 0.0
    s2, _ = _pair(t1, q1, t2, q2)
    rho = regularized_delta(s2, sigma)
    terms = ((w1[:, None] * w2[None, :]) * rho) * (1.0 - _vdot(v1, v2))
    # fsum is exactly rounded, so the value does not depend on term order
    return -(coupling / 2.0) * math.fsum(terms.ravel())


def _momentum(m, v, coupling, sigma, t_s, q_s, t_o, q_o, v_o, w_o):
    v2 = np.sum(v * v, axis=1)
    p = m * v / np.sqrt(1.0 - v2)[:, None]
    if coupling != 0.0:
        s2, _ = _pair(t_s, q_s, t_o, q_o)
        kern = w_o[None, :] * regularized_delta(s2, sigma)
        p = p + (coupling / 2.0) * np.sum(kern[:, :, None] * v_o[None, :, :], axis=1)
    return p


def _coordinate_force(coupling, sigma, t_s, q_s, v_s, t_o, q_o, v_o, w_o):
    """Functional derivative of the action with respect to ``q_s`` at fixed velocities."""
    if coupling == 0.0:
        return np.zeros_like(q_s)
    s2, dq = _pair(t_s, q_s, t_o, q_o)
    drho = -(s2 / sigma) * regularized_delta(s2, sigma)
    kern = (w_o[None, :] * drho) * (1.0 - _vdot(v_s, v_o))
    return coupling * np.sum(kern[:, :, None] * dq, axis=1)


@dataclass(frozen=True)
class _State:
    """Both particles' coordinates and (independent) velocities on their grids."""

    t1: np.ndarray
    q1: np.ndarray
    v1: np.ndarray
    w1: np.ndarray
    t2: np.ndarray
    q2: np.ndarray
    v2: np.ndarray
    w2: np.ndarray

    @classmethod
    def of(cls, traj1: Trajectory, traj2: Trajectory, v1=None, v2=None) -> "_State":
        return cls(
            traj1.t,
            traj1.values,
            velocity(traj1) if v1 is None else np.asarray(v1, dtype=float),
            traj1.grid.weights,
            traj2.t,
            traj2.values,
            velocity(traj2) if v2 is None else np.asarray(v2, dtype=float),
            traj2.grid.weights,
        )


def _breakdown(params: SystemParams, s: _State) -> ActionBreakdown:
    f1 = _free_action(params.m1, s.w1, s.v1, 1)
    f2 = _free_action(params.m2, s.w2, s.v2, 2)
    inter = _interaction(
        params.coupling, params.sigma, s.t1, s.q1, s.v1, s.w1, s.t2, s.q2, s.v2, s.w2
    )
    return ActionBreakdown(f1, f2, inter, f1 + f2 + inter)


def _momenta(params: SystemParams, s: _State):
    c, sig = params.coupling, params.sigma
    _check_speed(s.v1, 1)
    _check_speed(s.v2, 2)
    p1 = _momentum(params.m1, s.v1, c, sig, s.t1, s.q1, s.t2, s.q2, s.v2, s.w2)
    p2 = _momentum(params.m2, s.v2, c, sig, s.t2, s.q2, s.t1, s.q1, s.v1, s.w1)
    return p1, p2


def _forces(params: SystemParams, s: _State):
    c, sig = params.coupling, params.sigma
    f1 = _coordinate_force(c, sig, s.t1, s.q1, s.v1, s.t2, s.q2, s.v2, s.w2)
    f2 = _coordinate_force(c, sig, s.t2, s.q2, s.v2, s.t1, s.q1, s.v1, s.w1)
    return f1, f2


def _residual_report(r1, r2, dt1, dt2, meta) -> ResidualReport:
    r1 = np.array(r1, dtype=float)
    r2 = np.array(r2, dtype=float)
    r1[0] = r1[-1] = 0.0
    r2[0] = r2[-1] = 0.0
    inner1, inner2 = r1[1:-1], r2[1:-1]
    sup = float(max(np.max(np.abs(inner1)), np.max(np.abs(inner2))))
    l2 = math.sqrt(math.fsum(dt1 * (inner1 * inner1).ravel()) + math.fsum(dt2 * (inner2 * inner2).ravel()))
    r1.setflags(write=False)
    r2.setflags(write=False)
    return ResidualReport(r1, r2, sup, l2, meta)


def _local_action(params, s: _State, which, j, row, wrt, target) -> float:
    """Every term of the discretized action that involves node ``j`` of ``which``.

    ``row`` replaces that node's coordinate (``wrt="q"``) or velocity. All other
    terms do not depend on the node, so differences of this quantity equal
    differences of the full action while carrying far less rounding error.
    """
    if which == 1:
        t_s, q_s, v_s, w_s, m = s.t1, s.q1, s.v1, s.w1, params.m1
        t_o, q_o, v_o, w_o = s.t2, s.q2, s.v2, s.w2
    else:
        t_s, q_s, v_s, w_s, m = s.t2, s.q2, s.v2, s.w2, params.m2
        t_o, q_o, v_o, w_o = s.t1, s.q1, s.v1, s.w1
    q = q_s[j : j + 1]
    v = v_s[j : j + 1]
    if wrt == "q":
        q = row[None, :]
    else:
        v = row[None, :]
    total = 0.0
    if target in ("total", "free"):
        total += _free_action(m, w_s[j : j + 1], v, which)
    if target in ("total", "interaction"):
        total += _interaction(
            params.coupling, params.sigma, t_s[j : j + 1], q, v, w_s[j : j + 1], t_o, q_o, v_o, w_o
        )
    return total


# -- public operations -----------------------------------------------------


def fokker_action(traj1: Trajectory, traj2: Trajectory, params: SystemParams) -> ActionBreakdown:
    """Free and interaction parts of the regularized action, by trapezoid quadrature."""
    require_valid(params, traj1, traj2)
    return _breakdown(params, _State.of(traj1, traj2))


def momentum_fields(traj1: Trajectory, traj2: Trajectory, params: SystemParams):
    """Canonical momenta ``p_a = dI/dv_a`` on each particle's grid.

    ``p1 = m1 v1 / sqrt(1 - v1^2) + (c/2) int dt2 v2 rho(s12)`` and symmetrically for 2.
    """
    require_valid(params, traj1, traj2)
    return _momenta(params, _State.of(traj1, traj2))


def el_residual(traj1: Trajectory, traj2: Trajectory, params: SystemParams) -> ResidualReport:
    """``dI/dq_a - d/dt_a dI/dv_a`` at every node; endpoints are set to zero.

    The time derivative uses the same stencil as :func:`velocity`.
    """
    require_valid(params, traj1, traj2)
    s = _State.of(traj1, traj2)
    p1, p2 = _momenta(params, s)
    f1, f2 = _forces(params, s)
    r1 = f1 - time_derivative(p1, traj1.grid.dt)
    r2 = f2 - time_derivative(p2, traj2.grid.dt)
    meta = {
        "n1": traj1.grid.n_steps,
        "n2": traj2.grid.n_steps,
        "sigma": params.sigma,
        "coupling": params.coupling,
    }
    return _residual_report(r1, r2, traj1.grid.dt, traj2.grid.dt, meta)


_TARGETS = {
    "action": "total",
    "total": "total",
    "free": "free",
    "interaction": "interaction",
}


def numeric_functional_gradient(
    target: str,
    which: int,
    traj1: Trajectory,
    traj2: Trajectory,
    params: SystemParams,
    h: float = 1e-5,
    wrt: str = "q",
    richardson: bool = False,
) -> np.ndarray:
    """Central-difference functional derivative of (part of) the discretized action.

    ``target`` is ``"action"``, ``"free"`` or ``"interaction"``; ``wrt`` selects the
    nodal coordinates (``"q"``) or the nodal velocities (``"qdot"``) of particle
    ``which``, the other set of variables being held fixed. The step at a node is
    ``h * (1 + |x|)``. With ``richardson=True`` the steps ``h`` and ``h/2`` are
    combined to cancel the leading ``O(h^2)`` error.
    """
    if not np.isfinite(h) or h <= 0:
        raise InvalidStepError(f"step must be positive, got h={h}")
    if target not in _TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if which not in (1, 2):
        raise ValueError(f"particle must be 1 or 2, got {which}")
    if wrt not in ("q", "qdot"):
        raise ValueError(f"wrt must be 'q' or 'qdot', got {wrt!r}")
    require_valid(params, traj1, traj2)
    target = _TARGETS[target]
    base = _State.of(traj1, traj2)
    x0 = getattr(base, ("q" if wrt == "q" else "v") + str(which))
    n, d = x0.shape

    def node_grad(j, step):
        g = np.empty(d)
        for i in range(d):
            hj = step * (1.0 + abs(x0[j, i]))
            hi, lo = x0[j, i] + hj, x0[j, i] - hj
            row = x0[j].copy()
            row[i] = hi
            fp = _local_action(params, base, which, j, row, wrt, target)
            row[i] = lo
            fm = _local_action(params, base, which, j, row, wrt, target)
            g[i] = (fp - fm) / (hi - lo)
        w = base.w1[j] if which == 1 else base.w2[j]
        return g / w

    def field_at(step):
        return np.array(parallel.map_ordered(lambda j: node_grad(j, step), range(n)))

    if not richardson:
        return field_at(h)
    coarse = field_at(h)
    fine = field_at(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def numeric_el_residual(
    traj1: Trajectory,
    traj2: Trajectory,
    params: SystemParams,
    h: float = 1e-5,
    richardson: bool = True,
):
    """Euler-Lagrange combination of numeric gradients, one field per particle."""
    out = []
    for a, traj in ((1, traj1), (2, traj2)):
        gq = numeric_functional_gradient("action", a, traj1, traj2, params, h, "q", richardson)
        gv = numeric_functional_gradient("action", a, traj1, traj2, params, h, "qdot", richardson)
        r = gq - time_derivative(gv, traj.grid.dt)
        r[0] = r[-1] = 0.0
        out.append(r)
    return tuple(out)
