"""Generalized Legendre transform of the two-charge action.

Velocities are eliminated from the momentum equations

    p1 = m1 v1 / sqrt(1 - v1^2) + (c/2) int dt2 v2 rho(s12)     (and 1 <-> 2)

either to first order in the coupling or by damped fixed-point iteration. The
generalized Hamiltonian is ``H[q, p] = sum_a int p_a . F_a dt_a - I[q, F]`` and
the canonical action is ``sum_a int p_a . qdot_a dt_a - H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import parallel
from .action import _breakdown, _check_speed, _momenta, _pair, _State, regularized_delta, require_valid
from .errors import DimensionError, DivergenceError, InvalidStepError
from .trajectory import PhaseField, SystemParams, time_derivative, velocity

__all__ = [
    "VelocitySolution",
    "StationarityReport",
    "perturbative_velocities",
    "numeric_velocities",
    "recover_momenta",
    "generalized_hamiltonian",
    "first_order_hamiltonian",
    "canonical_action",
    "stationarity_residuals",
]

PERTURBATIVE = "perturbative-first-order"
FIXED_POINT = "fixed-point-numeric"


@dataclass(frozen=True)
class VelocitySolution:
    F1: np.ndarray
    F2: np.ndarray
    method: str
    iterations: int = 0
    converged: bool = True
    tol: float = 0.0
    history: list = field(default_factory=list)
    contraction_bound: float | None = None


@dataclass(frozen=True)
class StationarityReport:
    """Per-node residuals of ``qdot - dH/dp`` and ``pdot + dH/dq``."""

    q_residual1: np.ndarray
    q_residual2: np.ndarray
    p_residual1: np.ndarray
    p_residual2: np.ndarray
    q_sup_norm: float
    p_sup_norm: float
    q_l2_norm: float
    p_l2_norm: float

    def to_dict(self) -> dict:
        return {
            "q_residual1": self.q_residual1.tolist(),
            "q_residual2": self.q_residual2.tolist(),
            "p_residual1": self.p_residual1.tolist(),
            "p_residual2": self.p_residual2.tolist(),
            "q_sup_norm": self.q_sup_norm,
            "p_sup_norm": self.p_sup_norm,
            "q_l2_norm": self.q_l2_norm,
            "p_l2_norm": self.p_l2_norm,
        }


def _check_pair(phase1: PhaseField, phase2: PhaseField, params: SystemParams) -> None:
    require_valid(params, phase1.q, phase2.q)


def _energy(p, m):
    return np.sqrt(np.sum(p * p, axis=1) + m * m)


def _kernel(t_s, q_s, t_o, q_o, w_o, sigma):
    """``w_o[k] rho(s[j, k])``: quadrature kernel of the light-cone integral."""
    s2, _ = _pair(t_s, q_s, t_o, q_o)
    return w_o[None, :] * regularized_delta(s2, sigma)


def _apply(kern, f):
    return np.sum(kern[:, :, None] * f[None, :, :], axis=1)


def perturbative_velocities(
    phase1: PhaseField, phase2: PhaseField, params: SystemParams
) -> VelocitySolution:
    """First-order inversion of the momentum equations.

    ``F1 = p1/E1 + (c/2) int dt2 rho / (E1 E2) [p1 (p1.p2) / E1^2 - p2]`` with
    ``E = sqrt(p^2 + m^2)``, and symmetrically for particle 2.
    """
    _check_pair(phase1, phase2, params)
    c = params.coupling
    out = []
    for (ps, ms, ts, qs), (po, mo, to, qo, wo) in (
        ((phase1.p, params.m1, phase1.q.t, phase1.q.values),
         (phase2.p, params.m2, phase2.q.t, phase2.q.values, phase2.grid.weights)),
        ((phase2.p, params.m2, phase2.q.t, phase2.q.values),
         (phase1.p, params.m1, phase1.q.t, phase1.q.values, phase1.grid.weights)),
    ):
        Es, Eo = _energy(ps, ms), _energy(po, mo)
        F = ps / Es[:, None]
        if c != 0.0:
            kern = _kernel(ts, qs, to, qo, wo, params.sigma) / (Es[:, None] * Eo[None, :])
            pp = np.sum(ps[:, None, :] * po[None, :, :], axis=-1)
            bracket = ps[:, None, :] * (pp / (Es * Es)[:, None])[:, :, None] - po[None, :, :]
            F = F + (c / 2.0) * np.sum(kern[:, :, None] * bracket, axis=1)
        out.append(F)
    return VelocitySolution(out[0], out[1], PERTURBATIVE)


class _Eliminator:
    """Fixed-point velocity elimination for fixed coordinates."""

    def __init__(self, params: SystemParams, t1, q1, w1, t2, q2, w2):
        self.params = params
        c = params.coupling
        if c != 0.0:
            self.K12 = _kernel(t1, q1, t2, q2, w2, params.sigma)
            self.K21 = _kernel(t2, q2, t1, q1, w1, params.sigma)
            self.bound = (abs(c) / 2.0) * max(
                np.max(np.sum(self.K12, axis=1)) / params.m1,
                np.max(np.sum(self.K21, axis=1)) / params.m2,
            )
        else:
            self.K12 = self.K21 = None
            self.bound = 0.0

    def solve(self, p1, p2, tol, max_iter, damping=0.5) -> VelocitySolution:
        m1, m2, c = self.params.m1, self.params.m2, self.params.coupling
        F1 = p1 / _energy(p1, m1)[:, None]
        F2 = p2 / _energy(p2, m2)[:, None]
        history = []
        for it in range(1, max_iter + 1):
            if c != 0.0:
                r1 = p1 - (c / 2.0) * _apply(self.K12, F2)
                r2 = p2 - (c / 2.0) * _apply(self.K21, F1)
                G1 = r1 / _energy(r1, m1)[:, None]
                G2 = r2 / _energy(r2, m2)[:, None]
            else:
                G1, G2 = F1, F2
            d1, d2 = G1 - F1, G2 - F2
            upd = float(max(np.max(np.abs(d1)), np.max(np.abs(d2))))
            history.append(upd)
            F1 = F1 + damping * d1
            F2 = F2 + damping * d2
            if not np.isfinite(upd):
                break
            if upd < tol:
                if self.bound >= 1.0:
                    break
                return VelocitySolution(
                    F1, F2, FIXED_POINT, it, True, tol, history, self.bound
                )
        if self.bound >= 1.0:
            msg = (
                f"velocity elimination is not a contraction (bound {self.bound:.3g} >= 1); "
                "any fixed point found cannot be trusted"
            )
        else:
            msg = f"velocity elimination did not converge in {max_iter} iterations"
        raise DivergenceError(msg, history)


def numeric_velocities(
    phase1: PhaseField,
    phase2: PhaseField,
    params: SystemParams,
    tol: float = 1e-13,
    max_iter: int = 500,
    damping: float = 0.5,
) -> VelocitySolution:
    """Solve the momentum equations for the velocities by damped fixed-point iteration.

    Starts from the zero-coupling inversion ``p / sqrt(p^2 + m^2)`` and stops once
    the sup-norm of the update drops below ``tol``. Raises
    :class:`~multitime.errors.DivergenceError` (with the update history) when the
    iteration does not settle or when the map is not provably contractive.
    """
    _check_pair(phase1, phase2, params)
    el = _Eliminator(
        params,
        phase1.q.t, phase1.q.values, phase1.grid.weights,
        phase2.q.t, phase2.q.values, phase2.grid.weights,
    )
    return el.solve(phase1.p, phase2.p, tol, max_iter, damping)


def recover_momenta(phase1: PhaseField, phase2: PhaseField, params: SystemParams, sol: VelocitySolution):
    """Momenta implied by the velocities in ``sol``; equals ``(p1, p2)`` for an exact solution."""
    s = _State.of(phase1.q, phase2.q, sol.F1, sol.F2)
    return _momenta(params, s)


def _pF(w1, p1, F1, w2, p2, F2):
    return math.fsum(np.concatenate([w1 * np.sum(p1 * F1, axis=1), w2 * np.sum(p2 * F2, axis=1)]))


def generalized_hamiltonian(
    phase1: PhaseField, phase2: PhaseField, params: SystemParams, velocity_solution: VelocitySolution
) -> float:
    """``sum_a int p_a . F_a dt_a - I[q, F]`` for the velocities ``F`` provided."""
    F1 = np.asarray(velocity_solution.F1)
    F2 = np.asarray(velocity_solution.F2)
    if F1.shape != phase1.p.shape or F2.shape != phase2.p.shape:
        raise DimensionError(
            f"velocity fields {F1.shape}, {F2.shape} do not match phase fields "
            f"{phase1.p.shape}, {phase2.p.shape}"
        )
    _check_pair(phase1, phase2, params)
    s = _State.of(phase1.q, phase2.q, F1, F2)
    return _pF(s.w1, phase1.p, F1, s.w2, phase2.p, F2) - _breakdown(params, s).total


def first_order_hamiltonian(phase1: PhaseField, phase2: PhaseField, params: SystemParams) -> float:
    """Closed form of the Hamiltonian to first order in the coupling.

    ``int E1 dt1 + int E2 dt2 + (c/2) int int rho(s12) (1 - p1.p2 / (E1 E2))``
    """
    _check_pair(phase1, phase2, params)
    w1, w2 = phase1.grid.weights, phase2.grid.weights
    E1, E2 = _energy(phase1.p, params.m1), _energy(phase2.p, params.m2)
    free = math.fsum(np.concatenate([w1 * E1, w2 * E2]))
    if params.coupling == 0.0:
        return free
    s2, _ = _pair(phase1.q.t, phase1.q.values, phase2.q.t, phase2.q.values)
    rho = regularized_delta(s2, params.sigma)
    pp = np.sum(phase1.p[:, None, :] * phase2.p[None, :, :], axis=-1)
    terms = ((w1[:, None] * w2[None, :]) * rho) * (1.0 - pp / (E1[:, None] * E2[None, :]))
    return free + (params.coupling / 2.0) * math.fsum(terms.ravel())


def canonical_action(
    phase1: PhaseField,
    phase2: PhaseField,
    params: SystemParams,
    hamiltonian: str = "exact",
    tol: float = 1e-13,
    max_iter: int = 500,
) -> float:
    """``sum_a int p_a . qdot_a dt_a - H[q, p]``.

    ``hamiltonian="exact"`` eliminates velocities with :func:`numeric_velocities`;
    ``"first_order"`` uses :func:`first_order_hamiltonian`.
    """
    _check_pair(phase1, phase2, params)
    v1, v2 = velocity(phase1.q), velocity(phase2.q)
    pq = _pF(phase1.grid.weights, phase1.p, v1, phase2.grid.weights, phase2.p, v2)
    if hamiltonian == "exact":
        sol = numeric_velocities(phase1, phase2, params, tol=tol, max_iter=max_iter)
        H = generalized_hamiltonian(phase1, phase2, params, sol)
    elif hamiltonian == "first_order":
        H = first_order_hamiltonian(phase1, phase2, params)
    else:
        raise ValueError(f"unknown hamiltonian {hamiltonian!r}")
    return pq - H


def _hamiltonian_value(params, g1, q1, p1, g2, q2, p2, tol, max_iter, eliminator=None):
    t1, w1, t2, w2 = g1.nodes, g1.weights, g2.nodes, g2.weights
    el = eliminator or _Eliminator(params, t1, q1, w1, t2, q2, w2)
    sol = el.solve(p1, p2, tol, max_iter)
    s = _State(t1, q1, sol.F1, w1, t2, q2, sol.F2, w2)
    _check_speed(sol.F1, 1)
    return _pF(w1, p1, sol.F1, w2, p2, sol.F2) - _breakdown(params, s).total


def stationarity_residuals(
    phase1: PhaseField,
    phase2: PhaseField,
    params: SystemParams,
    h: float = 1e-5,
    tol: float = 1e-13,
    max_iter: int = 500,
    richardson: bool = False,
) -> StationarityReport:
    """Residuals of the canonical equations ``qdot = dH/dp`` and ``pdot = -dH/dq``.

    Functional derivatives of ``H`` are central differences with step
    ``h * (1 + |x|)`` divided by the node's quadrature weight; ``pdot`` uses the
    velocity stencil. Endpoint nodes are fixed and carry no residual.
    """
    if not np.isfinite(h) or h <= 0:
        raise InvalidStepError(f"step must be positive, got h={h}")
    _check_pair(phase1, phase2, params)
    g1, g2 = phase1.grid, phase2.grid
    base = {"q1": phase1.q.values, "p1": phase1.p, "q2": phase2.q.values, "p2": phase2.p}
    shared = _Eliminator(params, g1.nodes, base["q1"], g1.weights, g2.nodes, base["q2"], g2.weights)

    def H(arrays, key):
        # momentum perturbations leave the kernels unchanged
        el = shared if key.startswith("p") else None
        return _hamiltonian_value(
            params, g1, arrays["q1"], arrays["p1"], g2, arrays["q2"], arrays["p2"], tol, max_iter, el
        )

    def derivative(key, j, step):
        x0 = base[key]
        w = (g1 if key.endswith("1") else g2).weights[j]
        g = np.empty(x0.shape[1])
        for i in range(x0.shape[1]):
            hj = step * (1.0 + abs(x0[j, i]))
            hi, lo = x0[j, i] + hj, x0[j, i] - hj
            xp, xm = x0.copy(), x0.copy()
            xp[j, i], xm[j, i] = hi, lo
            g[i] = (H({**base, key: xp}, key) - H({**base, key: xm}, key)) / (hi - lo)
        return g / w

    def field(key, step):
        x0 = base[key]
        out = np.zeros_like(x0)
        out[1:-1] = parallel.map_ordered(lambda j: derivative(key, j, step), range(1, x0.shape[0] - 1))
        return out

    def grad(key):
        if not richardson:
            return field(key, h)
        return (4.0 * field(key, h / 2.0) - field(key, h)) / 3.0

    rq, rp = [], []
    for a, phase in ((1, phase1), (2, phase2)):
        dHdp = grad(f"p{a}")
        dHdq = grad(f"q{a}")
        r_q = velocity(phase.q) - dHdp
        r_p = time_derivative(phase.p, phase.grid.dt) + dHdq
        for r in (r_q, r_p):
            r[0] = r[-1] = 0.0
            r.setflags(write=False)
        rq.append(r_q)
        rp.append(r_p)

    def norms(r1, r2):
        sup = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
        l2 = math.sqrt(
            math.fsum(g1.dt * (r1 * r1).ravel()) + math.fsum(g2.dt * (r2 * r2).ravel())
        )
        return sup, l2

    qs, ql = norms(*rq)
    ps, pl = norms(*rp)
    return StationarityReport(rq[0], rq[1], rp[0], rp[1], qs, ps, ql, pl)
