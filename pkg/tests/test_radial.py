from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import special
from scipy.optimize import brentq

from bbspectra import radial
from bbspectra.radial import RadialProfile


def bessel_oracle(mbar=1.0, munder=1.0):
    r0 = 1 / math.sqrt(math.pi)

    def f(lam):
        k, q = math.sqrt(lam * mbar), math.sqrt(lam * munder)
        return k * special.j1(k * r0) / special.j0(k * r0) - q * special.k1(q * r0) / special.k0(q * r0)

    j0 = special.jn_zeros(0, 1)[0]
    return brentq(f, 1e-6, (j0 / r0) ** 2 / mbar * (1 - 1e-12), xtol=1e-15, rtol=1e-15)


@pytest.mark.parametrize("N, value", [(1, 0.5), (2, 0.5641895835477563), (3, 0.6203504908994000)])
def test_unit_ball_radius(N, value):
    r0 = radial.unit_ball_radius(N)
    assert math.isclose(r0, value, rel_tol=1e-15)
    vol = {1: 2 * r0, 2: math.pi * r0**2, 3: 4 * math.pi / 3 * r0**3}[N]
    assert math.isclose(vol, 1.0, rel_tol=1e-15)


def test_first_dirichlet_zero():
    assert math.isclose(radial.first_dirichlet_zero(2), special.jn_zeros(0, 1)[0], rel_tol=1e-14)
    assert math.isclose(radial.first_dirichlet_zero(3), math.pi, rel_tol=1e-15)


@pytest.mark.parametrize("mbar, munder", [(1.0, 1.0), (2.0, 0.5), (1.0, 4.0)])
def test_bessel_oracle(mbar, munder):
    prof = radial.solve_limit_eigen(2, mbar, munder)
    assert abs(prof.lambda0 - bessel_oracle(mbar, munder)) / prof.lambda0 <= 1e-6


def test_one_dimensional_closed_form():
    # cos(k r) inside, exp(-k r) outside with k = sqrt(lam): tan(k/2) = 1
    prof = radial.solve_limit_eigen(1)
    assert math.isclose(prof.lambda0, math.pi**2 / 4, rel_tol=1e-9)


def test_upper_bound_and_monotone_in_munder(profile):
    j0 = radial.first_dirichlet_zero(2)
    assert profile.lambda0 < j0**2 / (profile.mbar * profile.r0**2)
    assert radial.solve_limit_eigen(2, 1.0, 4.0).lambda0 > profile.lambda0


def test_profile_invariants(profile):
    assert profile.matching_defect <= 1e-9
    assert np.all(profile.w > 0)
    assert np.all(profile.dw[1:] < 0)
    assert np.all(np.diff(profile.w) < 0)
    l2 = profile.normalized("l2")
    assert math.isclose(l2.integral(l2.w**2), 1.0, rel_tol=1e-8)
    assert math.isclose(profile.integral(profile.w**2, profile.mbar, -profile.munder), 1.0, rel_tol=1e-8)


def test_resolution_doubling(profile):
    fine = radial.solve_limit_eigen(2, resolution=2 * radial.STEPS_PER_LENGTH)
    assert abs(fine.lambda0 - profile.lambda0) <= 1e-8 * profile.lambda0


def test_three_dimensional_decay():
    prof = radial.solve_limit_eigen(3)
    target = -math.sqrt(prof.lambda0 * prof.munder)
    assert abs(radial.decay_rate(prof) - target) <= 0.01 * abs(target)


def test_decay_rate_planar(profile):
    target = -math.sqrt(profile.lambda0)
    assert abs(radial.decay_rate(profile) - target) <= 0.01 * abs(target)


def test_decay_rate_synthetic():
    r = np.linspace(0.01, 10.0, 2001)
    kappa, N = 1.7, 3
    w = np.exp(-kappa * r) * r ** (-(N - 1) / 2)
    prof = RadialProfile(N, 1.0, 1.0, 0.62, 10.0, r, w, np.gradient(w, r), kappa**2, "l2", 100)
    assert math.isclose(radial.decay_rate(prof), -kappa, rel_tol=1e-10)


def test_decay_rate_needs_length(profile):
    short = radial.solve_limit_eigen(2, R=profile.r0 + 6.5 * profile.decay_length)
    with pytest.raises(ValueError):
        radial.decay_rate(short)


def test_finite_ball_sweep(profile):
    samples = radial.gap_samples(2, 1.0, 1.0, profile.lambda0, lengths=(2, 4, 6, 8, 10, 12))
    lams = np.array([lam for _, lam in samples])
    assert np.all(lams > profile.lambda0)
    assert np.all(np.diff(lams) < 0)


def test_thin_hostile_ring_is_nearly_dirichlet():
    r0 = radial.unit_ball_radius(2)
    R = 1.001 * r0
    dirichlet = (radial.first_dirichlet_zero(2) / R) ** 2
    lam = radial.lambda_finite_ball(2, 1.0, 1.0, R)
    # the hostile ring can only raise the eigenvalue above the Dirichlet value of B_R
    assert lam > dirichlet
    assert (lam - dirichlet) / dirichlet < 0.01


def test_gap_rate(profile):
    samples = radial.gap_samples(2, 1.0, 1.0, profile.lambda0)
    target = -2 * math.sqrt(profile.lambda0)
    fit = radial.fit_gap_rate(samples, profile.lambda0, target=target)
    assert fit.relative_error <= 0.05
    assert len(fit.pair_slopes) == len(samples) - 1


def test_gap_rate_synthetic():
    R = np.linspace(1.0, 4.0, 6)
    fit = radial.fit_gap_rate(list(zip(R, 3.0 + np.exp(-2.5 * R))), 3.0)
    assert math.isclose(fit.slope, -2.5, rel_tol=1e-10)


def test_gap_rate_preconditions():
    with pytest.raises(ValueError):
        radial.fit_gap_rate([(1.0, 4.0), (2.0, 3.5)], 3.0)
    with pytest.raises(ValueError, match="resolution exceeded"):
        radial.fit_gap_rate([(1.0, 4.0), (2.0, 3.5), (3.0, 3.1), (4.0, 3.0)], 3.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        radial.solve_limit_eigen(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        radial.solve_limit_eigen(2, R=0.3)
    with pytest.raises(ValueError):
        radial.lambda_finite_ball(2, 1.0, 1.0, 0.5)


def test_interpolation_matches_nodes(profile):
    np.testing.assert_allclose(profile(profile.r[::97]), profile.w[::97], rtol=1e-12, atol=1e-300)
    assert profile(profile.R + 1.0) == 0.0


def test_csv_json_export(tmp_path, profile):
    from bbspectra import io
    profile.write_csv(tmp_path / "w.csv", "abc")
    header, data = io.read_csv(tmp_path / "w.csv")
    assert header == ["r", "w"] and data.shape == (profile.r.size, 2)
    profile.write_json(tmp_path / "w.json")
    rec = io.read_json(tmp_path / "w.json")
    assert {"N", "mbar", "munder", "r0", "lambda0", "R", "norm_tag"} <= set(rec)
