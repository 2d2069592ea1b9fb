"""Self-consistency checks shared by the command line, the tests and the demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .action import el_residual, fokker_action, momentum_fields, numeric_el_residual, numeric_functional_gradient
from .canonical import canonical_action
from .solver import Endpoints
from .trajectory import PhaseField, SystemParams, TimeGrid, Trajectory

__all__ = [
    "GradientRow",
    "random_smooth_pair",
    "gradient_check",
    "legendre_check",
    "relative_error",
    "static_interaction_rate",
    "richardson_table",
]


def random_smooth_pair(
    endpoints: Endpoints,
    grids: tuple[TimeGrid, TimeGrid],
    rng: np.random.Generator,
    amplitude: float = 0.05,
    modes: int = 3,
) -> tuple[Trajectory, Trajectory]:
    """Straight paths plus a few random sine modes that vanish at both ends.

    Mode ``k`` has amplitude ``amplitude * u / k`` with ``u`` uniform in
    ``[-1, 1]``, so the added speed stays below ``amplitude * pi * modes / T``.
    """
    out = []
    for q0, qT, g in ((endpoints.q1_0, endpoints.q1_T, grids[0]), (endpoints.q2_0, endpoints.q2_T, grids[1])):
        base = Trajectory.straight(g, q0, qT).values
        s = g.nodes / g.T
        coef = rng.uniform(-1.0, 1.0, size=(modes, base.shape[1]))
        bump = sum(
            np.sin((k + 1) * np.pi * s)[:, None] * (amplitude * coef[k] / (k + 1)) for k in range(modes)
        )
        out.append(Trajectory(g, base + bump))
    return out[0], out[1]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Sup-norm difference over interior nodes, relative to the sup-norm of ``numeric``."""
    a, n = np.asarray(analytic)[1:-1], np.asarray(numeric)[1:-1]
    scale = float(np.max(np.abs(n)))
    err = float(np.max(np.abs(a - n)))
    return err / scale if scale > 0 else err


@dataclass(frozen=True)
class GradientRow:
    quantity: str
    particle: int
    abs_error: float
    scale: float
    rel_error: float


def gradient_check(traj1, traj2, params: SystemParams, h: float = 1e-4) -> list[GradientRow]:
    """Compare analytic momenta and Euler-Lagrange residuals with Richardson-extrapolated differences."""
    rows = []
    p = momentum_fields(traj1, traj2, params)
    for a in (1, 2):
        num = numeric_functional_gradient("action", a, traj1, traj2, params, h, "qdot", richardson=True)
        rows.append(_row("momentum", a, p[a - 1], num))
    rep = el_residual(traj1, traj2, params)
    num = numeric_el_residual(traj1, traj2, params, h, richardson=True)
    rows.append(_row("el_residual", 1, rep.residual1, num[0]))
    rows.append(_row("el_residual", 2, rep.residual2, num[1]))
    return rows


def _row(name, a, analytic, numeric) -> GradientRow:
    inner_a, inner_n = np.asarray(analytic)[1:-1], np.asarray(numeric)[1:-1]
    err = float(np.max(np.abs(inner_a - inner_n)))
    scale = float(np.max(np.abs(inner_n)))
    return GradientRow(name, a, err, scale, err / scale if scale > 0 else err)


def legendre_check(traj1, traj2, params: SystemParams, tol: float = 1e-13) -> dict:
    """Canonical action at the momenta of the paths versus the original action."""
    p1, p2 = momentum_fields(traj1, traj2, params)
    ph1, ph2 = PhaseField(traj1, p1), PhaseField(traj2, p2)
    original = fokker_action(traj1, traj2, params).total
    exact = canonical_action(ph1, ph2, params, "exact", tol=tol)
    first = canonical_action(ph1, ph2, params, "first_order")
    scale = abs(original) if original != 0 else 1.0
    return {
        "fokker_action": original,
        "canonical_exact": exact,
        "canonical_first_order": first,
        "relative_error_exact": abs(exact - original) / scale,
        "relative_error_first_order": abs(first - original) / scale,
    }


def static_interaction_rate(r: float, sigma: float) -> float:
    """``int rho_sigma(tau^2 - r^2) dtau`` over the real line, by adaptive quadrature.

    With ``u = tau^2 - r^2 = sqrt(sigma) z`` the integral becomes
    ``int phi(z) / sqrt(r^2 + sqrt(sigma) z) dz`` over ``z > -r^2 / sqrt(sigma)``
    (``phi`` the standard normal density), whose endpoint singularity is handled
    by an algebraic quadrature weight. Tends to ``1 / r`` as ``sigma -> 0``.
    """
    s = np.sqrt(sigma)
    lo = -r * r / s
    hi = 40.0

    def phi_over_sqrt_s(z):
        return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi) / np.sqrt(s)

    # 1/sqrt(r^2 + s z) = (z - lo)^(-1/2) / sqrt(s)
    if lo < -hi:
        val, _ = quad(lambda z: np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi) / np.sqrt(r * r + s * z),
                      -hi, hi, epsabs=1e-15, epsrel=1e-13, limit=500)
        return float(val)
    val, _ = quad(phi_over_sqrt_s, lo, hi, weight="alg", wvar=(-0.5, 0.0), epsabs=1e-15, epsrel=1e-13, limit=500)
    return float(val)


def richardson_table(h, values, order: int = 1):
    """Neville-style extrapolation to ``h -> 0`` for ``values(h)`` with error ``a1 h + a2 h^2 + ...``.

    ``h`` must halve from one entry to the next. Returns the rows of the tableau;
    the last row's single entry is the most extrapolated estimate.
    """
    h = np.asarray(h, dtype=float)
    if np.any(~np.isclose(h[1:] / h[:-1], 0.5)):
        raise ValueError("steps must halve between entries")
    rows = [np.asarray(values, dtype=float)]
    p = order
    while rows[-1].size > 1:
        prev = rows[-1]
        f = 2.0**p
        rows.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        p += 1
    return rows
