from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bbspectra import (
    BangBangWeight,
    GridDomain,
    NonConvergenceError,
    assemble_stiffness,
    assemble_weight_mass,
    ball_domain,
    principal_eigenvalue,
    solve_spd,
)
from bbspectra.spectral import export_triplets, rayleigh_quotient, read_triplets, solve_weighted_problem


def block(n, h=1.0):
    return GridDomain.from_predicate(lambda x, y: np.ones_like(x, dtype=bool), (0.0, 0.0), h, (n, n))


def dense_principal(K, M):
    """Smallest positive eigenvalue of K u = lam M u with a one-signed eigenvector."""
    vals, vecs = sla.eig(K.toarray(), np.diag(M))
    best = math.inf
    for lam, v in zip(vals, vecs.T):
        if np.isfinite(lam) and abs(lam.imag) < 1e-9 and lam.real > 0:
            v = np.real(v)
            v = v / v[np.argmax(np.abs(v))]
            if v.min() > -1e-9:
                best = min(best, lam.real)
    return best


def test_single_cell_stencil():
    K = assemble_stiffness(block(1))
    assert K.toarray().tolist() == [[4.0]]


def test_two_by_two_spectrum():
    K = assemble_stiffness(block(2)).toarray()
    np.testing.assert_allclose(np.linalg.eigvalsh(K), [2, 4, 4, 6], atol=1e-12)


def test_symmetry_and_positive_diagonal():
    K = assemble_stiffness(ball_domain(1.0, 20))
    assert (K - K.T).nnz == 0
    assert np.all(K.diagonal() > 0)


def test_unit_square_refinement():
    # interior nodes i*h, i = 1..n-1: the excluded neighbours sit exactly on the boundary
    n = 128
    h = 1.0 / n
    d = GridDomain.from_predicate(lambda x, y: np.ones_like(x, dtype=bool), (h / 2, h / 2), h, (n - 1, n - 1))
    K = assemble_stiffness(d)
    M = np.full(d.ndof, d.cell_volume)
    sol = principal_eigenvalue(K, M, cell_volume=d.cell_volume)
    assert abs(sol.lam - 2 * math.pi**2) / (2 * math.pi**2) < 0.01


def test_degenerate_domain():
    d = GridDomain.from_predicate(lambda x, y: np.zeros_like(x, dtype=bool), (0, 0), 1.0, (3, 3))
    with pytest.raises(ValueError, match="degenerate domain"):
        assemble_stiffness(d)


def test_mass_extremes_and_sum():
    d = block(3, 0.5)
    empty = assemble_weight_mass(d, BangBangWeight(2.0, 3.0, np.zeros(9, bool)))
    np.testing.assert_array_equal(empty, -3.0 * 0.25)
    full = assemble_weight_mass(d, BangBangWeight(2.0, 3.0, np.ones(9, bool)))
    np.testing.assert_array_equal(full, 2.0 * 0.25)
    E = np.array([1, 0, 1, 0, 1, 0, 0, 0, 1], bool)
    mixed = assemble_weight_mass(d, BangBangWeight(2.0, 3.0, E))
    assert math.isclose(mixed.sum(), 0.25 * (2.0 * 4 - 3.0 * 5), rel_tol=1e-15)


def test_mass_rejects_masked_cells():
    d = ball_domain(1.0, 8)
    grid = np.ones(d.shape, bool)
    with pytest.raises(ValueError):
        BangBangWeight.from_mask(d, grid, 1.0, 1.0)


def test_solve_spd_examples():
    K = sp.csr_matrix([[4.0]])
    np.testing.assert_allclose(solve_spd(K, np.array([8.0])), [2.0])
    np.testing.assert_array_equal(solve_spd(K, np.zeros(1)), [0.0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_spd_random(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((10, 10))
    K = A @ A.T + 10 * np.eye(10)
    b = rng.standard_normal(10)
    x = solve_spd(sp.csr_matrix(K), b, tol=1e-13)
    np.testing.assert_allclose(x, np.linalg.solve(K, b), rtol=1e-10, atol=1e-10)


def test_solve_spd_nonconvergence():
    K = assemble_stiffness(block(30))
    with pytest.raises(NonConvergenceError) as info:
        solve_spd(K, np.ones(900), tol=1e-14, maxiter=3)
    assert info.value.residual > 0


def test_all_favorable_block():
    d = block(2)
    K = assemble_stiffness(d)
    M = np.full(4, 3.0)
    sol = principal_eigenvalue(K, M)
    assert math.isclose(sol.lam, 2.0 / 3.0, rel_tol=1e-10)


def test_all_hostile_is_infinite():
    d = block(3)
    sol = principal_eigenvalue(assemble_stiffness(d), np.full(9, -1.0))
    assert sol.lam == math.inf and not sol.finite


def test_zero_mass_raises():
    with pytest.raises(ValueError):
        principal_eigenvalue(assemble_stiffness(block(2)), np.zeros(4))


def test_mostly_hostile_without_positive_mode_is_infinite():
    # one favorable cell with a tiny weight cannot beat a huge hostile region
    d = block(3)
    M = np.full(9, -50.0)
    M[4] = 1e-3
    K = assemble_stiffness(d).toarray()
    mu = sla.eigh(np.diag(M), K, eigvals_only=True).max()
    sol = principal_eigenvalue(sp.csr_matrix(K), M)
    assert (sol.lam == math.inf) == (mu <= 0)
    if mu > 0:
        assert math.isclose(sol.lam, 1 / mu, rel_tol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_indefinite_against_dense_pencil(seed):
    rng = np.random.default_rng(seed)
    d = block(3)
    E = rng.random(9) < 0.5
    E[4] = True
    w = BangBangWeight(1.0 + rng.random(), 0.1 + 0.3 * rng.random(), E)
    K = assemble_stiffness(d)
    M = assemble_weight_mass(d, w)
    sol = principal_eigenvalue(K, M)
    assert math.isclose(sol.lam, dense_principal(K, M), rel_tol=1e-8)
    assert np.all(sol.u > 0)
    assert math.isclose(rayleigh_quotient(K, M, sol.u), sol.lam, rel_tol=1e-10)


def _disk_problem(n=40):
    d = ball_domain(1.0, n)
    E = np.linalg.norm(d.centers(), axis=1) < 0.4
    return d, BangBangWeight(1.0, 1.0, E)


def test_eigensolution_invariants():
    d, w = _disk_problem()
    sol = solve_weighted_problem(d, w)
    K, M = assemble_stiffness(d), assemble_weight_mass(d, w)
    assert np.all(sol.u > 0)
    assert math.isclose(d.cell_volume * sol.u @ sol.u, 1.0, rel_tol=1e-12)
    r = np.linalg.norm(K @ sol.u - sol.lam * M * sol.u) / np.linalg.norm(K @ sol.u)
    assert r <= 1e-10
    ws = solve_weighted_problem(d, w, normalization="weighted")
    assert math.isclose(ws.u @ (M * ws.u), 1.0, rel_tol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 20.0))
def test_mass_scaling(c):
    d, w = _disk_problem(24)
    K, M = assemble_stiffness(d), assemble_weight_mass(d, w)
    a = principal_eigenvalue(K, M)
    b = principal_eigenvalue(K, c * M)
    assert math.isclose(b.lam, a.lam / c, rel_tol=1e-9)
    cos = a.u @ b.u / (np.linalg.norm(a.u) * np.linalg.norm(b.u))
    assert 1 - cos <= 1e-10


def test_domain_monotonicity():
    small = ball_domain(1.0, 40)
    big = GridDomain.from_predicate(lambda x, y: x**2 + y**2 < 1.3**2, small.lower - 0.3, small.h,
                                    tuple(n + 12 for n in small.shape))
    def fav(d):
        return np.linalg.norm(d.centers(), axis=1) < 0.35
    assert fav(small).sum() == fav(big).sum()
    lam_small = solve_weighted_problem(small, BangBangWeight(1.0, 1.0, fav(small))).lam
    lam_big = solve_weighted_problem(big, BangBangWeight(1.0, 1.0, fav(big))).lam
    assert lam_small >= lam_big


def test_shift_hint_does_not_change_result():
    d, w = _disk_problem()
    K, M = assemble_stiffness(d), assemble_weight_mass(d, w)
    cold = principal_eigenvalue(K, M)
    warm = principal_eigenvalue(K, M, shift=cold.lam * 1.3)
    assert math.isclose(cold.lam, warm.lam, rel_tol=1e-10)


def test_determinism():
    d, w = _disk_problem()
    a = solve_weighted_problem(d, w)
    b = solve_weighted_problem(d, w)
    assert a.lam == b.lam and np.array_equal(a.u, b.u)


def test_triplet_roundtrip(tmp_path):
    K = assemble_stiffness(ball_domain(1.0, 10))
    export_triplets(K, tmp_path / "k.txt")
    back = read_triplets(tmp_path / "k.txt")
    assert (back != K).nnz == 0


def test_grid_inradius_and_distance():
    d = ball_domain(1.0, 100)
    assert abs(d.inradius - 1.0) <= 2 * d.h
    assert d.distance[d.inside].min() <= d.h
