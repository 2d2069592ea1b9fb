from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from multitime import (
    LatticeSpec,
    SystemParams,
    build_action_operator,
    build_lattice,
    lowest_eigenvalues,
    stationarity_scan,
)
from multitime.errors import TooLargeError, ValidationError
from multitime.quantum import momentum_operator, position_operator, single_particle_operator

PARAMS = SystemParams(m1=1.0, m2=1.5, coupling=0.2, T1=1.0, T2=1.2, sigma=0.05)
MOVING = LatticeSpec(nt=3, nq=6, q1_0=-0.5, q1_T=-0.2, q2_0=0.5, q2_T=0.9)


def dense_smallest(A, k):
    w = np.linalg.eigvalsh(A.toarray())
    return np.sort(w[np.argsort(np.abs(w), kind="stable")[:k]])


@pytest.mark.parametrize("nt,nq,dim", [(2, 4, 16), (3, 8, 4096), (2, 100, 10000)])
def test_state_dimension(nt, nq, dim):
    assert build_lattice(LatticeSpec(nt=nt, nq=nq)).dimension == dim


def test_dimension_cap():
    with pytest.raises(TooLargeError) as info:
        build_lattice(LatticeSpec(nt=4, nq=32))
    assert info.value.dimension == 32**6


def test_endpoints_must_lie_in_the_box():
    with pytest.raises(ValidationError):
        build_lattice(LatticeSpec(q1_0=-3.0))


def test_index_map_is_a_bijection():
    lat = build_lattice(LatticeSpec(nt=3, nq=3))
    flat = [lat.flat_index(lat.multi_index(i)) for i in range(lat.dimension)]
    assert flat == list(range(lat.dimension))
    assert [lat.axis(a, j) for a in (1, 2) for j in (1, 2)] == [0, 1, 2, 3]
    with pytest.raises(IndexError):
        lat.axis(1, 0)


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValidationError):
        build_action_operator(build_lattice(MOVING), replace(PARAMS, sigma=0.0))


@pytest.mark.parametrize("spec", [LatticeSpec(nt=2, nq=12), MOVING])
def test_operator_is_exactly_hermitian(spec):
    A = build_action_operator(build_lattice(spec), PARAMS).matrix
    assert abs(A - A.conj().T).max() == 0.0
    assert np.all(np.isfinite(A.data))


def test_without_velocity_term_the_operator_is_real_symmetric():
    A = build_action_operator(build_lattice(MOVING), PARAMS, terms=("kinetic", "interaction")).matrix
    assert not np.iscomplexobj(A.data)
    assert abs(A - A.T).max() == 0.0


def test_kinetic_spectrum_matches_scaled_laplacian():
    spec = LatticeSpec(nt=2, nq=10)
    lat = build_lattice(spec)
    A = build_action_operator(lat, PARAMS, terms=("kinetic",)).matrix
    n, dq = spec.nq, lat.dq
    lap = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / dq**2
    mu = np.linalg.eigvalsh(lap)
    c1 = 1.0 / (2 * PARAMS.m1 * PARAMS.T1 / 2)
    c2 = 1.0 / (2 * PARAMS.m2 * PARAMS.T2 / 2)
    expected = np.sort((c1 * mu[:, None] + c2 * mu[None, :]).ravel())
    np.testing.assert_allclose(np.linalg.eigvalsh(A.toarray()), expected, atol=1e-10)


@pytest.mark.parametrize("spec", [LatticeSpec(nt=2, nq=20, q1_T=-0.2), MOVING])
@pytest.mark.parametrize("method", ["lu", "minres"])
def test_iterative_eigenvalues_match_dense(spec, method):
    op = build_action_operator(build_lattice(spec), PARAMS)
    res = lowest_eigenvalues(op, k=5, method=method)
    np.testing.assert_allclose(res.eigenvalues, dense_smallest(op.matrix, 5), rtol=0, atol=1e-8)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert np.all(res.residual_norms <= res.meta["residual_limit"])
    np.testing.assert_allclose(res.norms, 1.0, atol=1e-10)


def test_largest_and_most_negative_eigenvalues():
    op = build_action_operator(build_lattice(LatticeSpec(nt=2, nq=14)), PARAMS)
    w = np.linalg.eigvalsh(op.matrix.toarray())
    np.testing.assert_allclose(lowest_eigenvalues(op, 3, which="LA").eigenvalues, w[-3:], atol=1e-8)
    np.testing.assert_allclose(lowest_eigenvalues(op, 3, which="SA").eigenvalues, w[:3], atol=1e-8)


def test_probability_density_sums_to_one():
    op = build_action_operator(build_lattice(MOVING), PARAMS)
    res = lowest_eigenvalues(op, 3)
    density = np.abs(res.eigenvectors) ** 2
    np.testing.assert_allclose(density.sum(axis=0) * op.lattice.measure, 1.0, atol=1e-12)


@pytest.mark.parametrize("spec", [LatticeSpec(nt=2, nq=12, q1_T=0.3, q2_T=0.1), MOVING])
def test_uncoupled_spectrum_is_a_kronecker_sum(spec):
    lat = build_lattice(spec)
    free = replace(PARAMS, coupling=0.0)
    full = np.linalg.eigvalsh(build_action_operator(lat, free).matrix.toarray())
    a = np.linalg.eigvalsh(single_particle_operator(lat, free, 1).toarray())
    b = np.linalg.eigvalsh(single_particle_operator(lat, free, 2).toarray())
    np.testing.assert_allclose(full, np.sort((a[:, None] + b[None, :]).ravel()), atol=1e-8)


def test_doubling_hbar_quadruples_kinetic_eigenvalues():
    spec = LatticeSpec(nt=3, nq=5)
    free = replace(PARAMS, coupling=0.0)

    def eig(h):
        op = build_action_operator(build_lattice(replace(spec, hbar_tilde=h)), free, terms=("kinetic",))
        return np.linalg.eigvalsh(op.matrix.toarray())

    np.testing.assert_allclose(eig(2.0) / eig(1.0), 4.0, rtol=0, atol=1e-12)


class TestCommutator:
    spec = LatticeSpec(nt=3, nq=20, q_min=-3.0, q_max=3.0)

    def averaging(self, lat, axis):
        n = lat.spec.nq
        M = sp.diags([np.full(n - 1, 0.5), np.full(n - 1, 0.5)], [-1, 1])
        factors = [sp.identity(n)] * lat.n_axes
        factors[axis] = M
        out = factors[0]
        for f in factors[1:]:
            out = sp.kron(out, f)
        return out.tocsr()

    def test_same_slice_gives_averaged_identity_on_random_vectors(self, rng):
        lat = build_lattice(self.spec)
        Q, P = position_operator(lat, 2, 1), momentum_operator(lat, 2, 1, T=PARAMS.T2)
        v = rng.normal(size=lat.dimension) + 1j * rng.normal(size=lat.dimension)
        dt = PARAMS.T2 / self.spec.nt
        lhs = (Q @ (P @ v)) - (P @ (Q @ v))
        rhs = (1j * self.spec.hbar_tilde / dt) * (self.averaging(lat, lat.axis(2, 1)) @ v)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_same_slice_tends_to_ihbar_over_dt_on_smooth_states(self):
        errors = []
        for nq in (20, 40, 80):
            lat = build_lattice(LatticeSpec(nt=2, nq=nq, q_min=-3.0, q_max=3.0))
            g1, g2 = np.meshgrid(lat.q, lat.q, indexing="ij")
            v = np.exp(-(g1**2) - g2**2).ravel()
            Q, P = position_operator(lat, 1, 1), momentum_operator(lat, 1, 1, T=PARAMS.T1)
            lhs = (Q @ (P @ v)) - (P @ (Q @ v))
            target = (2j / PARAMS.T1) * v
            # averaging differs from the identity by (dq^2 / 2) d^2/dq^2, i.e. dq^2 at the peak
            errors.append(np.max(np.abs(lhs - target)) / np.max(np.abs(target)) / lat.dq**2)
        np.testing.assert_allclose(errors, 1.0, rtol=0.1)

    def test_different_slices_commute_exactly(self):
        lat = build_lattice(self.spec)
        for a, j, b, k in [(1, 1, 1, 2), (1, 1, 2, 1), (2, 2, 1, 2)]:
            Q, P = position_operator(lat, a, j), momentum_operator(lat, b, k, T=1.0)
            C = (Q @ P - P @ Q).tocsr()
            C.eliminate_zeros()
            assert C.nnz == 0


def test_scan_without_coupling_is_flat_in_sigma():
    spec = LatticeSpec(nt=2, nq=12, q1_T=-0.3)
    res = stationarity_scan(spec, replace(PARAMS, coupling=0.0), "sigma", [0.05, 0.1, 0.2, 0.3], k=3)
    assert np.all(res.ok)
    assert np.max(np.abs(res.derivatives)) < 1e-9
    assert np.ptp(res.eigenvalues, axis=0).max() < 1e-9


def test_scan_tracks_branches_with_large_overlap():
    spec = LatticeSpec(nt=2, nq=16, q1_T=-0.3)
    res = stationarity_scan(spec, PARAMS, "sigma", np.linspace(0.05, 0.5, 10), k=3)
    assert np.all(res.ok)
    assert np.nanmin(res.overlaps) >= 0.9
    assert res.to_csv().count("\n") == 11


def test_scan_derivatives_match_direct_differences():
    spec = LatticeSpec(nt=2, nq=12)
    vals = np.linspace(0.8, 1.2, 5)
    res = stationarity_scan(spec, PARAMS, "T", vals, k=2)
    lam = res.eigenvalues[:, 0]
    np.testing.assert_allclose(res.derivatives[1:-1, 0], (lam[2:] - lam[:-2]) / (vals[2:] - vals[:-2]), rtol=1e-12)


def test_scan_candidates_are_exactly_the_derivative_sign_changes():
    vals = np.linspace(0.3, 3.0, 15)
    res = stationarity_scan(LatticeSpec(nt=2, nq=12), PARAMS, "T", vals, k=3)
    flips = {
        (b + 1, float(vals[i]), float(vals[i + 1]))
        for b in range(3)
        for i in range(len(vals) - 1)
        if res.derivatives[i, b] * res.derivatives[i + 1, b] < 0
    }
    assert flips and set(res.candidates) == flips


def test_failed_points_are_flagged_and_skipped():
    spec = LatticeSpec(nt=2, nq=10, q_max=2.0)
    res = stationarity_scan(spec, PARAMS, "sigma", [-0.1, 0.1, 0.2, 0.3], k=2)
    assert list(res.ok) == [False, True, True, True]
    assert np.all(np.isnan(res.eigenvalues[0])) and len(res.errors) == 1


def test_scan_input_checks():
    with pytest.raises(ValueError):
        stationarity_scan(LatticeSpec(), PARAMS, "mass", [1, 2, 3])
    with pytest.raises(ValueError):
        stationarity_scan(LatticeSpec(), PARAMS, "sigma", [0.3, 0.2, 0.1])
