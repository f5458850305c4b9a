from __future__ import annotations

import math

import numpy as np
import pytest

from bbspectra import modes as hm
from bbspectra import radial


@pytest.mark.parametrize("N, ell, sigma", [(2, 1, 1), (2, 0, 0), (3, 2, 6), (3, 1, 2)])
def test_laplace_beltrami(N, ell, sigma):
    assert hm.laplace_beltrami_eigenvalue(N, ell) == sigma


def test_degree_one_is_minus_dw(profile, table):
    g = table.modes[1].g
    err = np.abs(g + profile.dw).max() / np.abs(profile.dw).max()
    assert err <= 1e-6


def test_degree_one_jump_reproduces_w_second_derivative_jump(profile, table):
    # [w''] = -lam0 (mbar + munder) w(r0), so -w' jumps by j
    assert math.isclose(table.modes[1].jump, table.jump, rel_tol=1e-10)
    assert math.isclose(table.jump, profile.lambda0 * 2 * profile.w_r0, rel_tol=1e-15)


@pytest.mark.parametrize("ell", [2, 3, 6])
def test_jump_condition(table, ell):
    assert math.isclose(table.modes[ell].jump, table.jump, rel_tol=1e-10)


def test_strict_ordering(table):
    g = np.array([table.g_r0(l) for l in range(1, 7)])
    assert np.all(-np.diff(g) > 1e-8)


def test_high_degree(profile, table):
    g10 = hm.solve_mode(profile, hm.laplace_beltrami_eigenvalue(2, 10))
    assert g10.g_r0 < table.g_r0(2)


def test_nonnegative(table):
    for m in table.modes.values():
        assert m.g.min() >= -1e-10 * m.g.max()


def test_sturm_identity(table):
    assert hm.sturm_residual(table, 1, 2) <= 1e-6
    assert hm.sturm_residual(table, 2, 5) <= 1e-6


def test_coercivity_positive_and_stable(profile, table):
    C = hm.coercivity_constant(table)
    assert C > 0
    fine = radial.solve_limit_eigen(2, resolution=2 * radial.STEPS_PER_LENGTH)
    C2 = hm.coercivity_constant(hm.mode_table(fine, 2))
    assert abs(C2 - C) <= 1e-6 * C


def test_coercivity_weight_scaling(table):
    # scaling both weights by c: lam0 -> lam0/c, weighted w -> w/sqrt(c), hence C -> C/c
    prof2 = radial.solve_limit_eigen(2, 2.0, 2.0)
    C2 = hm.coercivity_constant(hm.mode_table(prof2, 2))
    assert math.isclose(C2, table.coercivity / 2, rel_tol=1e-8)


def test_other_weights_keep_properties():
    t = hm.mode_table(radial.solve_limit_eigen(2, 2.0, 1.0), 6)
    g = [t.g_r0(l) for l in range(1, 7)]
    assert np.all(np.diff(g) < 0) and t.coercivity > 0
    assert t.coercivity == pytest.approx(2 * t.jump * (g[0] - g[1]), rel=1e-15)


def test_three_dimensional_modes():
    prof = radial.solve_limit_eigen(3)
    t = hm.mode_table(prof, 4)
    assert np.abs(t.modes[1].g + prof.dw).max() <= 1e-6 * np.abs(prof.dw).max()
    assert np.all(np.diff([t.g_r0(l) for l in range(1, 5)]) < 0)


def test_prediction_examples(table):
    assert hm.predicted_second_derivative({1: 1.0}, table) == 0.0
    assert hm.predicted_second_derivative({(1, 0): 0.3, (1, 1): -0.2}, table) == 0.0
    assert hm.predicted_second_derivative({}, table) == 0.0
    assert hm.predicted_second_derivative({2: 0.0, 3: 0.0}, table) == 0.0
    expected = 2 * table.jump * (table.g_r0(1) - table.g_r0(2))
    assert math.isclose(hm.predicted_second_derivative({2: 1.0}, table), expected, rel_tol=1e-15)
    r0 = table.profile.r0
    assert math.isclose(hm.predicted_second_derivative({2: 1.0}, table, measure="sphere"), expected * r0,
                        rel_tol=1e-15)
    assert math.isclose(table.single_mode_ratio(2), 0.5 * expected * r0, rel_tol=1e-15)


def test_prediction_errors(table):
    with pytest.raises(KeyError):
        hm.predicted_second_derivative({9: 1.0}, table)
    with pytest.raises(ValueError):
        hm.predicted_second_derivative({0: 1.0, 2: 1.0}, table)


def test_needs_weighted_profile(profile):
    with pytest.raises(ValueError):
        hm.mode_table(profile.normalized("l2"))
    with pytest.raises(ValueError):
        hm.mode_table(profile, 0)


def test_exports(tmp_path, table):
    from bbspectra import io
    table.write_csv(tmp_path / "m.csv", "h")
    header, data = io.read_csv(tmp_path / "m.csv")
    assert header == ["ell", "sigma", "g_r0"]
    assert np.all(np.diff(data[:, 2]) < 0)
    table.write_json(tmp_path / "m.json")
    rec = io.read_json(tmp_path / "m.json")
    assert rec["C"] > 0 and rec["j"] > 0
