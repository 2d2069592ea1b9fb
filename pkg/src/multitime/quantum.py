"""Lattice realization of the action operator on wave functionals.

A wave functional ``Psi[q1(t1), q2(t2)]`` with fixed endpoints becomes a
vector over the interior time slices of both particles, each slice taking
``nq`` positions inside a box with Dirichlet walls. One spatial dimension.

Conventions (logged in ``ActionOperator.meta``):

* ``delta / delta q(t_j)`` is ``(1/dt) d/dq_j``; the equal-time ``delta(0)``
  in the second functional derivative becomes ``1/dt``.
* The ``qdot * p`` term uses the central-difference velocity of the
  neighbouring slices, which commutes with ``d/dq_j``; the assembled matrix is
  symmetrized as ``(S + S^H) / 2`` and is therefore exactly Hermitian.
* ``I = sum_j [v_j p_j] - H`` with the nonrelativistic
  ``H = sum_j -hbar~^2/(2 m dt) d^2/dq_j^2 + (c/2) sum_jk w_j w_k rho(s_jk)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, minres, splu

from .action import regularized_delta
from .errors import EigensolverError, TooLargeError, ValidationError
from .trajectory import SystemParams, Violation, make_grid

__all__ = [
    "LatticeSpec",
    "Lattice",
    "ActionOperator",
    "SpectrumResult",
    "ScanResult",
    "build_lattice",
    "build_action_operator",
    "single_particle_operator",
    "position_operator",
    "momentum_operator",
    "lowest_eigenvalues",
    "stationarity_scan",
    "TERMS",
]

TERMS = ("pqdot", "kinetic", "interaction")
DEFAULT_CAP = 300_000


@dataclass(frozen=True)
class LatticeSpec:
    """``nt`` time steps per particle (``nt - 1`` free slices), ``nq`` interior box points."""

    nt: int = 2
    nq: int = 16
    q_min: float = -2.0
    q_max: float = 2.0
    hbar_tilde: float = 1.0
    q1_0: float = -0.5
    q1_T: float = -0.5
    q2_0: float = 0.5
    q2_T: float = 0.5
    dim_cap: int = DEFAULT_CAP

    @property
    def dimension(self) -> int:
        return self.nq ** (2 * (self.nt - 1))

    def violations(self) -> list[Violation]:
        out = []
        if int(self.nt) < 2:
            out.append(Violation("invalid-lattice", f"nt must be >= 2, got {self.nt}"))
        if int(self.nq) < 2:
            out.append(Violation("invalid-lattice", f"nq must be >= 2, got {self.nq}"))
        if not self.q_max > self.q_min:
            out.append(Violation("invalid-lattice", f"empty box [{self.q_min}, {self.q_max}]"))
        if not self.hbar_tilde > 0:
            out.append(Violation("invalid-lattice", f"hbar_tilde must be positive, got {self.hbar_tilde}"))
        for name in ("q1_0", "q1_T", "q2_0", "q2_T"):
            x = getattr(self, name)
            if not self.q_min < x < self.q_max:
                out.append(
                    Violation("endpoint-outside-box", f"{name}={x} outside ({self.q_min}, {self.q_max})")
                )
        return out


@dataclass(frozen=True)
class Lattice:
    """Index map between (particle, slice, grid point) and flat state indices.

    Axis ``(a - 1) * (nt - 1) + (j - 1)`` holds slice ``j`` of particle ``a``;
    flat indices follow C order over the axes.
    """

    spec: LatticeSpec
    q: np.ndarray
    dq: float

    @property
    def n_axes(self) -> int:
        return 2 * (self.spec.nt - 1)

    @property
    def shape(self) -> tuple:
        return (self.spec.nq,) * self.n_axes

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def measure(self) -> float:
        """Volume element of the discrete scalar product."""
        return self.dq ** self.n_axes

    def axis(self, particle: int, slice_: int) -> int:
        nt = self.spec.nt
        if particle not in (1, 2) or not 1 <= slice_ <= nt - 1:
            raise IndexError(f"no free slice {slice_} for particle {particle}")
        return (particle - 1) * (nt - 1) + (slice_ - 1)

    def flat_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def multi_index(self, flat: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def endpoint(self, particle: int, slice_: int) -> float | None:
        """Fixed position at a boundary slice, ``None`` for free slices."""
        s = self.spec
        if slice_ == 0:
            return s.q1_0 if particle == 1 else s.q2_0
        if slice_ == s.nt:
            return s.q1_T if particle == 1 else s.q2_T
        return None


def build_lattice(spec: LatticeSpec) -> Lattice:
    found = spec.violations()
    if found:
        raise ValidationError(found)
    if spec.dimension > spec.dim_cap:
        raise TooLargeError(spec.dimension, spec.dim_cap)
    dq = (spec.q_max - spec.q_min) / (spec.nq + 1)
    q = spec.q_min + dq * np.arange(1, spec.nq + 1)
    q.setflags(write=False)
    return Lattice(spec, q, dq)


@dataclass(frozen=True)
class ActionOperator:
    matrix: sp.csr_matrix
    lattice: Lattice
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


# -- one-axis building blocks ---------------------------------------------


def _second_difference(n: int, dq: float) -> sp.csr_matrix:
    return sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr") / (dq * dq)


def _central_difference(n: int, dq: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr") / (2.0 * dq)


def _embed(n_axes: int, nq: int, factors: dict) -> sp.csr_matrix:
    """Kronecker product placing ``factors[axis]`` on its axis and identities elsewhere."""
    out = None
    eye = sp.identity(nq, format="csr")
    for ax in range(n_axes):
        f = factors.get(ax, eye)
        out = f if out is None else sp.kron(out, f, format="csr")
    return out


def position_operator(lattice: Lattice, particle: int, slice_: int) -> sp.csr_matrix:
    ax = lattice.axis(particle, slice_)
    return _embed(lattice.n_axes, lattice.spec.nq, {ax: sp.diags(lattice.q, format="csr")})


def momentum_operator(lattice: Lattice, particle: int, slice_: int, T: float) -> sp.csr_matrix:
    """``(hbar~/i) delta/delta q(t_j) = (hbar~/i)(1/dt) d/dq_j`` with a central difference."""
    dt = T / lattice.spec.nt
    ax = lattice.axis(particle, slice_)
    D = _central_difference(lattice.spec.nq, lattice.dq)
    return _embed(lattice.n_axes, lattice.spec.nq, {ax: D}) * (-1j * lattice.spec.hbar_tilde / dt)


def _particle_terms(lattice: Lattice, params: SystemParams, particle: int, terms, axes_of, n_axes):
    """Kinetic and ``qdot p`` pieces of particle ``particle`` on ``n_axes`` axes."""
    spec = lattice.spec
    nq, dq, hb = spec.nq, lattice.dq, spec.hbar_tilde
    m = params.mass(particle)
    dt = params.horizon(particle) / spec.nt
    X = sp.diags(lattice.q, format="csr")
    L = _second_difference(nq, dq)
    D = _central_difference(nq, dq)
    out = []
    for j in range(1, spec.nt):
        ax = axes_of(particle, j)
        if "kinetic" in terms:
            out.append(_embed(n_axes, nq, {ax: L}) * (hb * hb / (2.0 * m * dt)))
        if "pqdot" in terms:
            # v_j = (q_{j+1} - q_{j-1}) / (2 dt); weight dt times (hbar~/i)(1/dt) d/dq_j
            scale = -1j * hb / (2.0 * dt)
            for nb, sign in ((j + 1, 1.0), (j - 1, -1.0)):
                fixed = lattice.endpoint(particle, nb)
                if fixed is None:
                    op = _embed(n_axes, nq, {axes_of(particle, nb): X, ax: D})
                else:
                    op = _embed(n_axes, nq, {ax: D}) * fixed
                out.append(op * (sign * scale))
    return out


def _interaction_diagonal(lattice: Lattice, params: SystemParams) -> np.ndarray:
    """``-(c/2) sum_jk w1_j w2_k rho(s_jk)`` evaluated on every lattice state."""
    spec = lattice.spec
    g1, g2 = make_grid(params.T1, spec.nt), make_grid(params.T2, spec.nt)
    t1, t2, w1, w2 = g1.nodes, g2.nodes, g1.weights, g2.weights
    n = lattice.n_axes
    diag = np.zeros(lattice.shape)

    def coords(particle, j):
        fixed = lattice.endpoint(particle, j)
        if fixed is not None:
            return np.array(fixed), None
        ax = lattice.axis(particle, j)
        shape = [1] * n
        shape[ax] = spec.nq
        return lattice.q.reshape(shape), ax

    for j in range(spec.nt + 1):
        x1, _ = coords(1, j)
        for k in range(spec.nt + 1):
            x2, _ = coords(2, k)
            s2 = (t1[j] - t2[k]) ** 2 - (x1 - x2) ** 2
            diag = diag + (w1[j] * w2[k]) * regularized_delta(s2, params.sigma)
    return -(params.coupling / 2.0) * diag.ravel()


def build_action_operator(
    lattice: Lattice, params: SystemParams, spec: LatticeSpec | None = None, terms=TERMS
) -> ActionOperator:
    """Sparse Hermitian matrix of the action operator on ``lattice``.

    ``terms`` selects any subset of ``"pqdot"``, ``"kinetic"`` and
    ``"interaction"``. Without the ``qdot p`` term the matrix is real symmetric.
    """
    spec = spec or lattice.spec
    if spec is not lattice.spec:
        lattice = build_lattice(spec)
    terms = tuple(terms)
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise ValueError(f"unknown operator terms {sorted(unknown)}")
    if not np.isfinite(params.sigma) or params.sigma <= 0:
        raise ValidationError(
            [Violation("invalid-regularization", f"sigma must be positive, got {params.sigma}")]
        )
    if spec.dimension > spec.dim_cap:
        raise TooLargeError(spec.dimension, spec.dim_cap)

    dtype = complex if "pqdot" in terms else float
    S = sp.csr_matrix((lattice.dimension, lattice.dimension), dtype=dtype)
    for a in (1, 2):
        for piece in _particle_terms(lattice, params, a, terms, lattice.axis, lattice.n_axes):
            S = S + piece
    if "interaction" in terms and params.coupling != 0.0:
        S = S + sp.diags(_interaction_diagonal(lattice, params), format="csr")
    A = ((S + S.conj().T) * 0.5).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    meta = {
        "sigma": params.sigma,
        "coupling": params.coupling,
        "m1": params.m1,
        "m2": params.m2,
        "dt1": params.T1 / spec.nt,
        "dt2": params.T2 / spec.nt,
        "dq": lattice.dq,
        "hbar_tilde": spec.hbar_tilde,
        "terms": list(terms),
        "functional_derivative": "delta/delta q(t_j) -> (1/dt) d/dq_j; delta(0) -> 1/dt",
        "ordering": "symmetrized (S + S^H)/2",
    }
    return ActionOperator(A, lattice, meta)


def single_particle_operator(
    lattice: Lattice, params: SystemParams, particle: int, terms=("pqdot", "kinetic")
) -> sp.csr_matrix:
    """Part of the zero-coupling operator acting on one particle's own slices."""
    nt = lattice.spec.nt

    def local_axis(a, j):
        return j - 1

    pieces = _particle_terms(lattice, params, particle, tuple(terms), local_axis, nt - 1)
    n = lattice.spec.nq ** (nt - 1)
    S = sp.csr_matrix((n, n), dtype=complex if "pqdot" in terms else float)
    for piece in pieces:
        S = S + piece
    return ((S + S.conj().T) * 0.5).tocsr()


# -- spectrum ---------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    norms: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "residual_norms": self.residual_norms.tolist(),
            "norms": self.norms.tolist(),
            "meta": dict(self.meta),
        }

    def to_csv(self) -> str:
        lines = ["index,lambda,residual_norm,norm"]
        for i, (lam, r, n) in enumerate(zip(self.eigenvalues, self.residual_norms, self.norms), 1):
            lines.append(",".join([str(i)] + [format(float(x), ".17g") for x in (lam, r, n)]))
        return "\n".join(lines) + "\n"


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def _onenorm(A) -> float:
    return float(abs(A).sum(axis=0).max())


def _shift_invert(A, method: str, inner_tol: float):
    """Operator applying ``A^-1``; ``"lu"`` factorizes, ``"minres"`` uses matrix-vector products only."""
    n = A.shape[0]
    if method == "lu":
        lu = splu(A.tocsc())
        return LinearOperator(A.shape, matvec=lu.solve, dtype=A.dtype)
    if np.iscomplexobj(A.data):
        # Hermitian H = R + iJ acts like the real symmetric [[R, -J], [J, R]] on (Re x, Im x).
        R = sp.bmat([[A.real, -A.imag], [A.imag, A.real]], format="csr")
    else:
        R = A

    def apply(b):
        b = np.asarray(b).ravel()
        rb = np.concatenate([b.real, b.imag]) if R is not A else b
        x, info = minres(R, rb, rtol=inner_tol, maxiter=50 * n)
        if info != 0:
            raise EigensolverError(f"inner MINRES solve failed (info={info})")
        return x[:n] + 1j * x[n:] if R is not A else x

    return LinearOperator(A.shape, matvec=apply, dtype=A.dtype)


def lowest_eigenvalues(
    op: ActionOperator,
    k: int = 4,
    tol: float = 1e-12,
    which: str = "SM",
    method: str = "auto",
    maxiter=None,
) -> SpectrumResult:
    """``k`` eigenpairs of the action operator with an implicitly restarted Lanczos solver.

    ``which="SM"`` (default) returns the eigenvalues of smallest magnitude by
    Lanczos on ``A^-1``. The inverse is applied through a sparse LU factorization
    (``method="lu"``) or MINRES inner solves that need only products with ``A``
    (``method="minres"``); ``"auto"`` picks LU up to dimension 5000. ``"LA"`` and
    ``"SA"`` run Lanczos on ``A`` itself. Eigenvalues are sorted ascending and
    eigenvectors normalized under ``sum |Psi|^2 dq^n = 1``.
    """
    A = op.matrix
    n = A.shape[0]
    if not 1 <= k < n - 1:
        raise ValueError(f"need 1 <= k < dimension - 1, got k={k} for dimension {n}")
    if method == "auto":
        method = "lu" if n <= 5000 else "minres"
    if method not in ("lu", "minres"):
        raise ValueError(f"method must be 'auto', 'lu' or 'minres', got {method!r}")
    v0 = np.ones(n, dtype=A.dtype)
    scale = max(1.0, _onenorm(A))
    try:
        if which == "SM":
            try:
                inv = _shift_invert(A, method, inner_tol=min(1e-3 * tol, 1e-14))
            except RuntimeError as exc:
                raise EigensolverError(f"shift-invert at zero failed: {exc}") from exc
            mu, vecs = eigsh(inv, k=k, which="LM", tol=tol, v0=v0, maxiter=maxiter)
            vals = 1.0 / np.real(mu)
        elif which in ("LA", "SA"):
            vals, vecs = eigsh(A, k=k, which=which, tol=tol, v0=v0, maxiter=maxiter)
        else:
            raise ValueError(f"unsupported selection {which!r}")
    except ArpackNoConvergence as exc:
        history = []
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            for mu, vec in zip(exc.eigenvalues, exc.eigenvectors.T):
                lam = 1.0 / mu if which == "SM" else mu
                history.append((float(np.real(lam)), float(np.linalg.norm(A @ vec - lam * vec))))
        raise EigensolverError(f"Lanczos iteration did not converge: {exc}", history) from exc

    vecs = vecs / np.linalg.norm(vecs, axis=0)
    # Rayleigh quotients are accurate to the square of the vector error.
    vals = np.real(np.einsum("ij,ij->j", vecs.conj(), A @ vecs))
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    residuals = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
    limit = max(tol, 1e-10) * scale
    if np.any(residuals > limit):
        raise EigensolverError(
            f"Ritz residuals {residuals.max():.3g} exceed {limit:.3g}",
            list(zip(vals.tolist(), residuals.tolist())),
        )
    measure = op.lattice.measure
    vecs = np.column_stack([_fix_phase(vecs[:, i]) for i in range(k)]) / math.sqrt(measure)
    norms = np.sum(np.abs(vecs) ** 2, axis=0) * measure
    return SpectrumResult(
        vals,
        vecs,
        residuals,
        norms,
        {"which": which, "method": method if which == "SM" else "lanczos", "tol": tol,
         "dimension": n, "residual_limit": limit},
    )


# -- parameter scans --------------------------------------------------------


SCAN_PARAMETERS = ("sigma", "T", "hbar_tilde")


@dataclass(frozen=True)
class ScanResult:
    parameter: str
    values: np.ndarray
    eigenvalues: np.ndarray
    derivatives: np.ndarray
    overlaps: np.ndarray
    ok: np.ndarray
    errors: tuple
    candidates: tuple

    def to_csv(self) -> str:
        k = self.eigenvalues.shape[1]
        head = ["param"] + [f"lambda_{i}" for i in range(1, k + 1)] + [f"dlambda_{i}" for i in range(1, k + 1)]
        lines = [",".join(head)]
        for x, lam, d in zip(self.values, self.eigenvalues, self.derivatives):
            lines.append(",".join(format(float(v), ".17g") for v in (x, *lam, *d)))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": self.values.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "derivatives": self.derivatives.tolist(),
            "overlaps": self.overlaps.tolist(),
            "ok": self.ok.tolist(),
            "errors": list(self.errors),
            "stationary_candidates": [
                {"branch": b, "between": [lo, hi]} for b, lo, hi in self.candidates
            ],
        }


def _apply_parameter(spec: LatticeSpec, params: SystemParams, name: str, value: float):
    if name == "sigma":
        return spec, replace(params, sigma=value)
    if name == "T":
        return spec, replace(params, T1=value, T2=value)
    return replace(spec, hbar_tilde=value), params


def stationarity_scan(
    spec: LatticeSpec,
    params: SystemParams,
    parameter: str,
    values,
    k: int = 3,
    tol: float = 1e-12,
    terms=TERMS,
) -> ScanResult:
    """Track ``k`` eigenvalue branches of the action operator across a parameter sweep.

    Branches are matched between neighbouring points by maximal eigenvector
    overlap. Derivatives are finite differences over the successful points
    (central inside, one-sided at the ends); a sign change of a derivative
    between neighbours is reported as a stationary-point candidate. A point whose
    eigensolve fails is flagged and the scan goes on.
    """
    if parameter not in SCAN_PARAMETERS:
        raise ValueError(f"parameter must be one of {SCAN_PARAMETERS}, got {parameter!r}")
    values = np.asarray(values, dtype=float)
    if values.size < 3 or np.any(np.diff(values) <= 0):
        raise ValueError("need at least 3 strictly increasing parameter values")
    n = values.size
    lam = np.full((n, k), np.nan)
    ovl = np.full((n, k), np.nan)
    ok = np.zeros(n, dtype=bool)
    errors: list = []
    prev = None
    for i, x in enumerate(values):
        s, p = _apply_parameter(spec, params, parameter, float(x))
        try:
            res = lowest_eigenvalues(build_action_operator(build_lattice(s), p, terms=terms), k, tol)
        except (EigensolverError, ValidationError) as exc:
            errors.append(f"{parameter}={x:.17g}: {exc}")
            continue
        vecs, vals = res.eigenvectors, res.eigenvalues
        if prev is None:
            perm = np.arange(k)
            ovl[i] = 1.0
        else:
            measure = build_lattice(s).measure
            O = np.abs(prev.conj().T @ vecs) * measure
            rows, cols = linear_sum_assignment(-O)
            perm = cols[np.argsort(rows)]
            ovl[i] = O[np.arange(k), perm]
        lam[i] = vals[perm]
        prev = vecs[:, perm]
        ok[i] = True

    der = np.full((n, k), np.nan)
    good = np.flatnonzero(ok)
    if good.size >= 2:
        edge = 2 if good.size >= 3 else 1
        der[good] = np.gradient(lam[good], values[good], axis=0, edge_order=edge)
    candidates = []
    for b in range(k):
        for i0, i1 in zip(good[:-1], good[1:]):
            d0, d1 = der[i0, b], der[i1, b]
            if d0 == 0.0 or d0 * d1 < 0:
                candidates.append((b + 1, float(values[i0]), float(values[i1])))
    return ScanResult(parameter, values, lam, der, ovl, ok, tuple(errors), tuple(candidates))
