from __future__ import annotations

import math

import numpy as np
import pytest

from bbspectra import optimizer as opt
from bbspectra import radial
from bbspectra.spectral import BangBangWeight, solve_weighted_problem


@pytest.fixture(scope="module")
def disk():
    return opt.DomainSpec.parse("disk:1.0")


@pytest.fixture(scope="module")
def disk_run(disk):
    domain = disk.grid(2 / 128)
    return opt.rearrangement_optimize(domain, 0.02 * disk.volume)


def test_domain_parsing():
    e = opt.DomainSpec.parse("ellipse:1.0,0.6")
    assert e.d_star == 0.6 and math.isclose(e.volume, math.pi * 0.6)
    assert opt.DomainSpec.parse("disk:2").d_star == 2
    assert opt.DomainSpec.parse("rectangle:2,1").d_star == 0.5
    for bad in ("blob:1", "disk:-1", "disk:a", "ellipse:1", "disk:1,2"):
        with pytest.raises(ValueError):
            opt.DomainSpec.parse(bad)


def test_grids_are_centered_and_odd(disk):
    d = disk.grid(0.05)
    assert all(n % 2 == 1 for n in d.shape)
    np.testing.assert_allclose(d.lower + d.upper, 0, atol=1e-14)


@pytest.mark.parametrize("text, dstar", [("disk:1.0", 1.0), ("ellipse:1.0,0.6", 0.6)])
def test_incenter_inradius(text, dstar):
    spec = opt.DomainSpec.parse(text)
    d = spec.grid(2 / 200)
    assert abs(opt.incenter_field(d).d_star - dstar) <= 2 * d.h


def test_rectangle_incenter_is_a_segment():
    d = opt.DomainSpec.parse("rectangle:2,1").grid(1 / 41)
    inc = opt.incenter_field(d)
    assert len(inc.points) > 10
    assert np.ptp(inc.points[:, 1]) <= d.h and np.ptp(inc.points[:, 0]) > 0.5


def test_disk_optimum_is_concentric(disk, disk_run):
    res = disk_run
    diag = opt.diagnostics(res)
    h = res.domain.h
    assert res.trace.status in ("fixed_point", "tol_reached")
    assert diag.barycenter_distance <= 2 * h
    n = opt.favorable_count(res.domain, res.eps)
    ball = opt.initial_set(res.domain, n, "incenter_ball")
    assert np.mean(ball[res.favorable]) >= 0.95
    assert diag.components4 == 1 and diag.local_maxima == 1


def test_trace_invariants(disk):
    domain = disk.grid(2 / 64)
    res = opt.rearrangement_optimize(domain, 0.1 * disk.volume, init="random", seed=3)
    lam = res.trace.lambdas
    assert np.all(lam[1:] <= lam[:-1] + 1e-12 * np.abs(lam[:-1]))
    assert res.trace.rejected == 0 and res.trace.status == "fixed_point"
    assert len(lam) > 3
    assert len({r.count for r in res.trace.records}) == 1
    assert res.favorable.sum() == opt.favorable_count(domain, res.eps)


def test_full_measure_is_all_favorable(disk):
    domain = disk.grid(2 / 40)
    eps = domain.ndof * domain.cell_volume
    res = opt.rearrangement_optimize(domain, eps)
    assert res.favorable.all()
    ref = solve_weighted_problem(domain, BangBangWeight(1.0, 1.0, np.ones(domain.ndof, bool)))
    assert math.isclose(res.lam, ref.lam, rel_tol=1e-10)


def test_epsilon_below_resolution(disk):
    with pytest.raises(ValueError, match="epsilon below resolution"):
        opt.rearrangement_optimize(disk.grid(0.1), 1e-5)


def test_random_inits_agree(disk):
    domain = disk.grid(2 / 256)
    eps = 0.25 * disk.volume
    a = opt.rearrangement_optimize(domain, eps, init="random", seed=1)
    b = opt.rearrangement_optimize(domain, eps, init="random", seed=2)
    assert abs(a.lam - b.lam) <= 1e-6


def test_disk_matches_radial_finite_ball(disk, disk_run):
    # same quantity by two paths: grid optimum vs the radial Lambda(d* eps^{-1/2})
    scaled = disk_run.eps * disk_run.lam
    radial_value = disk_run.eps * opt.disk_prediction(disk_run.eps, 1.0)
    assert abs(scaled - radial_value) <= 0.02 * radial_value


def test_polar_of_rasterized_disk(disk):
    domain = disk.grid(2 / 200)
    eps = 0.05 * disk.volume
    n = opt.favorable_count(domain, eps)
    mask = domain.to_grid(opt.initial_set(domain, n), False)
    p = opt.extract_polar_parametrization(domain, mask.astype(float), (0.0, 0.0), eps)
    assert p.star_shaped
    assert p.sup <= 2 * domain.h * eps ** (-0.5)


def test_non_star_shaped_mask_flagged(disk):
    domain = disk.grid(2 / 100)
    x, y = np.meshgrid(*domain.axes(), indexing="ij")
    r = np.hypot(x, y)
    ring = (r < 0.15) | ((r > 0.3) & (r < 0.45))
    with pytest.raises(opt.NotStarShapedError) as info:
        opt.extract_polar_parametrization(domain, ring.astype(float), (0.0, 0.0), 0.1)
    assert info.value.param.violations > 0
    with pytest.raises(ValueError, match="outside"):
        opt.extract_polar_parametrization(domain, ring.astype(float), (0.22, 0.0), 0.1)


def test_blowup_comparison(disk, disk_run, profile):
    cmp = opt.blowup_compare(disk_run, profile)
    assert cmp.regime == "ok"
    assert cmp.sup_relative <= 0.10
    big = opt.rearrangement_optimize(disk.grid(2 / 64), 0.9 * disk.volume)
    assert opt.blowup_compare(big, profile).regime == "out of asymptotic regime"


def test_gap_fit_domain():
    lam0, d = 8.0, 0.6
    eps = np.array([0.08, 0.04, 0.02, 0.01])
    lam = (lam0 + np.exp(-1.5 * eps ** -0.5)) / eps
    fit = opt.gap_fit_domain(list(zip(eps, lam)), lam0, d)
    assert fit.status == "ok" and math.isclose(fit.slope, -1.5, rel_tol=1e-8)
    flat = [(e, lam0 / e) for e in eps]
    assert opt.gap_fit_domain(flat, lam0, d).status == "inconclusive"
    with pytest.raises(ValueError):
        opt.gap_fit_domain(flat[:3], lam0, d)


def test_ellipse_sweep_trends(profile):
    spec = opt.DomainSpec.parse("ellipse:1.0,0.6")
    pts = opt.run_sweep(spec, [0.04, 0.02, 0.01, 0.005], 12, lambda0=profile.lambda0)
    scaled = np.array([p.diagnostics.scaled_lambda for p in pts])
    assert np.all(np.diff(scaled) <= 1e-12 * scaled[:-1])
    assert all(p.diagnostics.components4 == 1 and p.diagnostics.local_maxima == 1 for p in pts)
    assert abs(scaled[-1] / profile.lambda0 - 1) <= 0.05
    assert all(p.trace_monotone for p in pts)


def test_sweep_order_is_input_order(profile):
    spec = opt.DomainSpec.parse("ellipse:1.0,0.6")
    pts = opt.run_sweep(spec, [0.01, 0.04], 8, lambda0=profile.lambda0)
    assert [p.eps_fraction for p in pts] == [0.01, 0.04]


def test_domain_spec_other_shapes():
    for text in ("stadium:0.5,0.4", "lshape:1.0"):
        spec = opt.DomainSpec.parse(text)
        d = spec.grid(0.05)
        res = opt.rearrangement_optimize(d, 0.05 * spec.volume)
        assert res.trace.is_monotone()
