"""Optimal favorable sets on bounded domains by superlevel-set rearrangement.

Each iteration solves the principal eigenproblem for the current set and then
replaces the set by the ``n`` cells where the eigenfunction is largest.  For a
fixed eigenfunction this choice maximizes ``sum m_i u_i^2``, so the discrete
Rayleigh quotient, and hence the eigenvalue, cannot increase.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator
from scipy.integrate import trapezoid

from .grid import GridDomain
from .radial import RadialProfile, lambda_finite_ball, unit_ball_radius
from .spectral import (
    BangBangWeight,
    EigenSolution,
    assemble_stiffness,
    assemble_weight_mass,
    principal_eigenvalue,
)

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12


# --- domains -------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    tag: str
    params: tuple[float, ...]
    predicate: Callable = field(repr=False, compare=False)
    half_extent: tuple[float, float]
    volume: float
    d_star: float | None = None

    @classmethod
    def parse(cls, text: str) -> "DomainSpec":
        try:
            tag, _, rest = text.partition(":")
            params = tuple(float(x) for x in rest.split(",")) if rest else ()
        except ValueError as exc:
            raise ValueError(f"invalid domain spec {text!r}") from exc
        if any(not p > 0 for p in params):
            raise ValueError(f"domain parameters must be positive: {text!r}")
        maker = _DOMAINS.get(tag)
        if maker is None:
            raise ValueError(f"unknown domain tag {tag!r}")
        nargs = maker.__code__.co_argcount
        if len(params) != nargs:
            raise ValueError(f"domain {tag!r} takes {nargs} parameter(s)")
        return maker(*params)

    def __str__(self) -> str:
        return f"{self.tag}:" + ",".join(f"{p:g}" for p in self.params)

    def grid(self, h: float) -> GridDomain:
        """Grid of spacing ``h`` centered on the origin with an odd cell count per axis.

        The odd count puts a cell center on every symmetry center of the shapes.
        """
        shape = []
        for e in self.half_extent:
            n = int(math.ceil(2 * e / h)) + 1
            shape.append(n + 1 - n % 2)
        shape = tuple(shape)
        lower = -0.5 * h * np.asarray(shape, dtype=float)
        return GridDomain.from_predicate(self.predicate, lower, h, shape)


def _disk(r):
    return DomainSpec("disk", (r,), lambda x, y: x * x + y * y < r * r, (r, r), math.pi * r * r, r)


def _ellipse(a, b):
    return DomainSpec("ellipse", (a, b), lambda x, y: (x / a) ** 2 + (y / b) ** 2 < 1, (a, b),
                      math.pi * a * b, min(a, b))


def _rectangle(w, h):
    return DomainSpec("rectangle", (w, h), lambda x, y: (np.abs(x) < w / 2) & (np.abs(y) < h / 2),
                      (w / 2, h / 2), w * h, min(w, h) / 2)


def _stadium(a, r):
    # segment [-a, a] x {0} thickened by r
    def inside(x, y):
        return (np.maximum(np.abs(x) - a, 0.0) ** 2 + y * y) < r * r

    return DomainSpec("stadium", (a, r), inside, (a + r, r), 4 * a * r + math.pi * r * r, r)


def _lshape(s):
    # [-s, s]^2 minus the quadrant [0, s]^2
    def inside(x, y):
        box = (np.abs(x) < s) & (np.abs(y) < s)
        return box & ~((x >= 0) & (y >= 0))

    return DomainSpec("lshape", (s,), inside, (s, s), 3 * s * s, None)


_DOMAINS = {"disk": _disk, "ellipse": _ellipse, "rectangle": _rectangle, "stadium": _stadium, "lshape": _lshape}


@dataclass(frozen=True)
class Incenter:
    distance: np.ndarray  # grid-shaped
    d_star: float
    cells: np.ndarray  # (k, N) integer grid indices of the argmax set
    points: np.ndarray  # (k, N) coordinates

    def distance_to(self, point) -> float:
        return float(np.min(np.linalg.norm(self.points - np.asarray(point), axis=1)))

    @property
    def center(self) -> np.ndarray:
        """Argmax point nearest to the mean of the argmax set."""
        mean = self.points.mean(axis=0)
        return self.points[np.argmin(np.linalg.norm(self.points - mean, axis=1))]


def incenter_field(domain: GridDomain, rtol: float = 1e-9) -> Incenter:
    if domain.ndof == 0:
        raise ValueError("degenerate domain: no interior cells")
    d = domain.distance
    dmax = float(d.max())
    cells = np.argwhere(d >= dmax * (1 - rtol))
    points = domain.lower + (cells + 0.5) * domain.h
    return Incenter(d, dmax, cells, points)


# --- rearrangement -------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    lam: float
    count: int
    changed: int


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    rejected: int = 0
    rejected_increase: float = 0.0  # relative size of the largest refused increase

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    def is_monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        lam = self.lambdas
        return bool(np.all(lam[1:] <= lam[:-1] + slack * np.abs(lam[:-1])))

    def record(self) -> dict:
        return {
            "status": self.status,
            "rejected": self.rejected,
            "rejected_increase": self.rejected_increase,
            "lambda": self.lambdas,
            "count": [r.count for r in self.records],
            "changed": [r.changed for r in self.records],
        }


@dataclass(frozen=True)
class OptimizationResult:
    domain: GridDomain = field(repr=False)
    eps: float
    mbar: float
    munder: float
    favorable: np.ndarray = field(repr=False)  # DOF mask
    solution: EigenSolution = field(repr=False)
    trace: OptimizationTrace = field(repr=False)

    @property
    def lam(self) -> float:
        return self.solution.lam

    @property
    def mask(self) -> np.ndarray:
        return self.domain.to_grid(self.favorable, False)


def _top_cells(values: np.ndarray, n: int) -> np.ndarray:
    order = np.lexsort((np.arange(values.size), -values))
    mask = np.zeros(values.size, dtype=bool)
    mask[order[:n]] = True
    return mask


def favorable_count(domain: GridDomain, eps: float) -> int:
    n = int(round(eps / domain.cell_volume))
    if n <= 0:
        raise ValueError("epsilon below resolution")
    if n > domain.ndof:
        raise ValueError("epsilon exceeds the domain measure")
    return n


def initial_set(domain: GridDomain, n: int, init="incenter_ball", seed: int = 0) -> np.ndarray:
    if isinstance(init, np.ndarray):
        mask = np.asarray(init, dtype=bool)
        mask = domain.dof_mask(mask) if mask.shape == domain.shape else mask
        if mask.shape != (domain.ndof,) or mask.sum() != n:
            raise ValueError("initial mask has the wrong size or cell count")
        return mask
    if init == "incenter_ball":
        c = incenter_field(domain).center
        return _top_cells(-np.linalg.norm(domain.centers() - c, axis=1), n)
    if init == "random":
        rng = np.random.default_rng(seed)
        mask = np.zeros(domain.ndof, dtype=bool)
        mask[rng.choice(domain.ndof, size=n, replace=False)] = True
        return mask
    raise ValueError(f"unknown init {init!r}")


def rearrangement_optimize(domain: GridDomain, eps: float, mbar: float = 1.0, munder: float = 1.0,
                           init="incenter_ball", tol: float = 1e-10, maxit: int = 200,
                           seed: int = 0, K=None) -> OptimizationResult:
    """Alternate eigen-solves and top-cell reselection until the set is stationary."""
    if not 0 < eps:
        raise ValueError("epsilon must be positive")
    n = favorable_count(domain, eps)
    K = assemble_stiffness(domain) if K is None else K
    E = initial_set(domain, n, init, seed)
    trace = OptimizationTrace()
    sol = None
    for it in range(maxit):
        M = assemble_weight_mass(domain, BangBangWeight(mbar, munder, E))
        hint = sol.lam if sol is not None and sol.finite else None
        new = principal_eigenvalue(K, M, shift=hint, cell_volume=domain.cell_volume)
        if sol is not None and new.lam > sol.lam * (1 + MONOTONE_SLACK):
            # an increase breaks the invariant: stop on the previous set and record it
            trace.rejected += 1
            trace.rejected_increase = max(trace.rejected_increase, new.lam / sol.lam - 1)
            E = prev_E
            trace.status = "increase_refused"
            break
        prev_lam = sol.lam if sol is not None else math.inf
        sol = new
        E_next = _top_cells(sol.u, n)
        changed = int(np.count_nonzero(E_next != E))
        trace.records.append(TraceRecord(sol.lam, int(E.sum()), changed))
        if changed == 0:
            trace.status = "fixed_point"
            break
        if prev_lam - sol.lam < tol * sol.lam:
            trace.status = "tol_reached"
            break
        prev_E, E = E, E_next
    else:
        trace.status = "maxit"
    return OptimizationResult(domain, eps, mbar, munder, E, sol, trace)


# --- post-processing -----------------------------------------------------

def _interpolator(domain: GridDomain, values: np.ndarray) -> RegularGridInterpolator:
    return RegularGridInterpolator(domain.axes(), values, method="linear", bounds_error=False, fill_value=0.0)


@dataclass(frozen=True)
class PolarParametrization:
    theta: np.ndarray
    radius: np.ndarray  # physical boundary radius
    phi: np.ndarray  # blow-up scale: radius * eps^{-1/N} - r0
    star_shaped: bool
    violations: int

    @property
    def l2(self) -> float:
        return float(math.sqrt(2 * np.pi * np.mean(self.phi**2)))

    @property
    def sup(self) -> float:
        return float(np.abs(self.phi).max())

    @property
    def c1(self) -> float:
        dth = self.theta[1] - self.theta[0]
        return float(np.abs(np.diff(np.append(self.phi, self.phi[0]))).max() / dth)


class NotStarShapedError(ValueError):
    def __init__(self, param: PolarParametrization):
        super().__init__(f"set is not star-shaped about the center ({param.violations} rays)")
        self.param = param


def extract_polar_parametrization(domain: GridDomain, field_grid: np.ndarray, center, eps: float,
                                  angular_res: int = 256, level: float = 0.5,
                                  raise_on_violation: bool = True) -> PolarParametrization:
    """Boundary radius along rays from ``center`` where the interpolated field crosses ``level``.

    With the favorable indicator as field and level 1/2 this traces the set
    itself; with the eigenfunction and level alpha it traces the matching
    superlevel set with sub-cell accuracy.
    """
    if domain.dim != 2:
        raise NotImplementedError("polar extraction is implemented in the plane")
    center = np.asarray(center, dtype=float)
    f = _interpolator(domain, np.asarray(field_grid, dtype=float))
    if not f(center[None])[0] > level:
        raise ValueError("center lies outside the set")
    h = domain.h
    rmax = float(np.linalg.norm(np.maximum(np.abs(domain.lower - center), np.abs(domain.upper - center))))
    s = np.arange(0.0, rmax, h / 4)
    theta = 2 * np.pi * np.arange(angular_res) / angular_res
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pts = center + s[None, :, None] * dirs[:, None, :]
    vals = f(pts.reshape(-1, 2)).reshape(angular_res, s.size) - level
    radius = np.empty(angular_res)
    violations = 0
    for k in range(angular_res):
        above = vals[k] > 0
        cross = np.flatnonzero(above[:-1] & ~above[1:])
        if np.count_nonzero(above[:-1] != above[1:]) > 1:
            violations += 1
        i = cross[0]
        v0, v1 = vals[k, i], vals[k, i + 1]
        radius[k] = s[i] + (s[i + 1] - s[i]) * v0 / (v0 - v1)
    scale = eps ** (-1.0 / domain.dim)
    param = PolarParametrization(theta, radius, radius * scale - unit_ball_radius(domain.dim),
                                 violations == 0, violations)
    if violations and raise_on_violation:
        raise NotStarShapedError(param)
    return param


def superlevel_threshold(result: OptimizationResult) -> float:
    """Level halfway between the smallest u inside the set and the largest outside."""
    u = result.solution.u
    inside = u[result.favorable]
    outside = u[~result.favorable]
    if outside.size == 0:
        return 0.0
    return 0.5 * (float(inside.min()) + float(outside.max()))


def strict_local_maxima(domain: GridDomain, u: np.ndarray) -> np.ndarray:
    """Grid indices of cells where u exceeds every stencil neighbour."""
    ug = domain.to_grid(u, -np.inf)
    padded = np.pad(ug, 1, constant_values=-np.inf)
    core = tuple(slice(1, -1) for _ in range(domain.dim))
    is_max = domain.inside.copy()
    for axis in range(domain.dim):
        for shift in (-1, 1):
            nb = np.roll(padded, shift, axis=axis)[core]
            is_max &= ug > nb
    return np.argwhere(is_max)


def boundary_cells(domain: GridDomain, mask_grid: np.ndarray) -> np.ndarray:
    """Cells of the set with a stencil neighbour outside it."""
    eroded = ndimage.binary_erosion(mask_grid, structure=ndimage.generate_binary_structure(domain.dim, 1),
                                    border_value=0)
    return mask_grid & ~eroded


@dataclass(frozen=True)
class Diagnostics:
    components4: int
    components8: int
    local_maxima: int
    barycenter: np.ndarray
    max_point: np.ndarray
    barycenter_distance: float
    max_distance: float
    scaled_lambda: float
    scaled_ratio: float
    alpha: float
    h: float

    def record(self) -> dict:
        return dict(self.__dict__)


def diagnostics(result: OptimizationResult, lambda0: float | None = None) -> Diagnostics:
    domain = result.domain
    N = domain.dim
    mask = result.mask
    c4 = ndimage.label(mask, ndimage.generate_binary_structure(N, 1))[1]
    c8 = ndimage.label(mask, ndimage.generate_binary_structure(N, N))[1]
    u = result.solution.u
    maxima = strict_local_maxima(domain, u)
    centers = domain.centers()
    bary = centers[result.favorable].mean(axis=0)
    imax = int(np.argmax(u))
    pmax = centers[imax]
    inc = incenter_field(domain)
    ug = domain.to_grid(u, 0.0)
    bnd = boundary_cells(domain, mask)
    alpha = float(ug[bnd].min()) if bnd.any() else math.nan
    scaled = result.eps ** (2.0 / N) * result.lam
    ratio = scaled / lambda0 if lambda0 else math.nan
    return Diagnostics(int(c4), int(c8), int(len(maxima)), bary, pmax, inc.distance_to(bary),
                       inc.distance_to(pmax), scaled, ratio, alpha, domain.h)


def in_asymptotic_regime(eps: float, d_star: float, lambda0: float, munder: float, N: int = 2,
                         lengths: float = 4.0) -> bool:
    """Blow-up radius d* eps^{-1/N} at least r0 + ``lengths`` decay lengths."""
    return d_star * eps ** (-1.0 / N) >= unit_ball_radius(N) + lengths / math.sqrt(lambda0 * munder)


@dataclass(frozen=True)
class BlowupComparison:
    l2: float
    sup: float
    sup_relative: float
    regime: str  # "ok" or "out of asymptotic regime"
    rho: np.ndarray = field(repr=False)
    averaged: np.ndarray = field(repr=False)

    def record(self) -> dict:
        return {"l2": self.l2, "sup": self.sup, "sup_relative": self.sup_relative, "regime": self.regime}


def blowup_compare(result: OptimizationResult, profile: RadialProfile, center=None,
                   angular_res: int = 128, radial_points: int = 400) -> BlowupComparison:
    """Compare the angular average of k^{N/2} u(p + k y), k = eps^{1/N}, with w."""
    domain = result.domain
    if domain.dim != 2:
        raise NotImplementedError("blow-up comparison is implemented in the plane")
    if profile.normalization != "l2":
        profile = profile.normalized("l2")
    N = domain.dim
    sol = result.solution
    u = sol.u if sol.normalization == "l2" else sol.u / math.sqrt(domain.cell_volume * sol.u @ sol.u)
    k = result.eps ** (1.0 / N)
    if center is None:
        center = domain.centers()[int(np.argmax(u))]
    center = np.asarray(center, dtype=float)
    inc = incenter_field(domain)
    dist_c = float(_interpolator(domain, inc.distance)(center[None])[0])
    rho_max = min(profile.R, (dist_c + domain.h / 2) / k)
    rho = np.linspace(0.0, rho_max, radial_points)
    f = _interpolator(domain, domain.to_grid(u, 0.0))
    theta = 2 * np.pi * np.arange(angular_res) / angular_res
    pts = center + k * rho[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)[None]
    avg = k ** (N / 2) * f(pts.reshape(-1, 2)).reshape(rho.size, angular_res).mean(axis=1)
    w = profile(rho)
    diff = avg - w
    l2 = math.sqrt(float(trapezoid(diff**2 * 2 * np.pi * rho, x=rho)))
    sup = float(np.abs(diff).max())
    regime = "ok" if in_asymptotic_regime(result.eps, inc.d_star, profile.lambda0, profile.munder, N) else \
        "out of asymptotic regime"
    return BlowupComparison(l2, sup, sup / float(profile.w[0]), regime, rho, avg)


@dataclass(frozen=True)
class DomainGapFit:
    status: str  # "ok" or "inconclusive"
    slope: float
    pair_slopes: np.ndarray
    target: float
    used: int

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.target) / abs(self.target)

    def record(self) -> dict:
        return dict(self.__dict__)


def gap_fit_domain(samples: Sequence[tuple[float, float]], lambda0: float, d_star: float,
                   munder: float = 1.0, N: int = 2, noise: float = 0.0) -> DomainGapFit:
    """Slope of log(eps^{2/N} lambda_eps - lambda0) against eps^{-1/N}."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4:
        raise ValueError("need at least 4 sweep points")
    eps, lam = data[:, 0], data[:, 1]
    x = eps ** (-1.0 / N)
    gap = eps ** (2.0 / N) * lam - lambda0
    keep = gap > max(noise, 0.0)
    target = -2 * math.sqrt(lambda0 * munder) * d_star
    if keep.sum() < 3:
        return DomainGapFit("inconclusive", math.nan, np.array([]), target, int(keep.sum()))
    xs, ys = x[keep], np.log(gap[keep])
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    slope = float(np.polyfit(xs, ys, 1)[0])
    return DomainGapFit("ok", slope, np.diff(ys) / np.diff(xs), target, int(keep.sum()))


def disk_prediction(eps: float, d_star: float, mbar: float = 1.0, munder: float = 1.0, N: int = 2) -> float:
    """eps^{-2/N} Lambda(d* eps^{-1/N}) for a concentric ball in a ball."""
    return eps ** (-2.0 / N) * lambda_finite_ball(N, mbar, munder, d_star * eps ** (-1.0 / N))


# --- sweeps --------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    eps: float
    eps_fraction: float
    h: float
    lam: float
    diagnostics: Diagnostics
    phi_l2: float
    phi_sup: float
    star_shaped: bool
    status: str
    iterations: int
    trace_monotone: bool
    trace: OptimizationTrace = field(repr=False)

    @property
    def lambdas(self) -> np.ndarray:
        return self.trace.lambdas

    def row(self) -> dict:
        d = self.diagnostics
        return {
            "eps": self.eps,
            "eps_fraction": self.eps_fraction,
            "h": self.h,
            "lambda": self.lam,
            "scaled_lambda": d.scaled_lambda,
            "scaled_ratio": d.scaled_ratio,
            "components4": d.components4,
            "components8": d.components8,
            "local_maxima": d.local_maxima,
            "barycenter_distance": d.barycenter_distance,
            "max_distance": d.max_distance,
            "alpha": d.alpha,
            "phi_l2": self.phi_l2,
            "phi_sup": self.phi_sup,
            "star_shaped": int(self.star_shaped),
            "status": self.status,
            "iterations": self.iterations,
            "trace_monotone": int(self.trace_monotone),
        }


def sweep_grid_spacing(eps: float, cells_per_radius: float, N: int = 2) -> float:
    """Spacing giving a fixed number of cells across the radius of a ball of measure eps."""
    return (eps ** (1.0 / N)) * unit_ball_radius(N) / cells_per_radius


def sweep_point(spec: DomainSpec, frac: float, cells_per_radius: float, mbar: float = 1.0,
                munder: float = 1.0, lambda0: float | None = None, h: float | None = None,
                angular_res: int = 256, maxit: int = 200, init="incenter_ball") -> SweepPoint:
    eps = frac * spec.volume
    h = sweep_grid_spacing(eps, cells_per_radius) if h is None else h
    res = rearrangement_optimize(spec.grid(h), eps, mbar, munder, init=init, maxit=maxit)
    return _summarize(res, frac, lambda0, angular_res)


def transplant(prev: OptimizationResult, domain: GridDomain) -> np.ndarray | None:
    """Carry a favorable set to another grid in blow-up coordinates.

    Cells are identified by their lattice offset from the incenter cell, which
    is exact when both grids have the same number of cells per blow-up length.
    Returns None when the set does not fit.
    """
    c_old = incenter_field(prev.domain).cells
    c_new = incenter_field(domain).cells
    ref_old = c_old[np.argmin(np.linalg.norm(c_old - c_old.mean(axis=0), axis=1))]
    ref_new = c_new[np.argmin(np.linalg.norm(c_new - c_new.mean(axis=0), axis=1))]
    cells = np.argwhere(prev.mask) - ref_old + ref_new
    if np.any(cells < 0) or np.any(cells >= np.asarray(domain.shape)):
        return None
    grid = np.zeros(domain.shape, dtype=bool)
    grid[tuple(cells.T)] = True
    if np.any(grid & ~domain.inside):
        return None
    return domain.dof_mask(grid)


def run_sweep(spec: DomainSpec, fractions: Sequence[float], cells_per_radius: float,
              mbar: float = 1.0, munder: float = 1.0, lambda0: float | None = None,
              continuation: bool = True, angular_res: int = 256, maxit: int = 200) -> list[SweepPoint]:
    """Optimize along decreasing eps with h proportional to eps^{1/N}.

    With continuation each point starts from the previous optimum carried over
    in blow-up coordinates; on nested blow-up domains this start already has a
    scaled eigenvalue no larger than the previous one.
    """
    order = sorted(range(len(fractions)), key=lambda i: -fractions[i])
    points: dict[int, SweepPoint] = {}
    prev = None
    for i in order:
        frac = fractions[i]
        eps = frac * spec.volume
        h = sweep_grid_spacing(eps, cells_per_radius)
        domain = spec.grid(h)
        n = favorable_count(domain, eps)
        init = "incenter_ball"
        if continuation and prev is not None:
            carried = transplant(prev, domain)
            if carried is not None and carried.sum() == n:
                init = carried
        res = rearrangement_optimize(domain, eps, mbar, munder, init=init, maxit=maxit)
        points[i] = _summarize(res, frac, lambda0, angular_res)
        prev = res
    return [points[i] for i in range(len(fractions))]


def polar_of_result(res: OptimizationResult, center=None, angular_res: int = 256,
                    boundary: str = "indicator") -> PolarParametrization:
    """Polar parametrization of the optimal set, traced from the indicator or from a level set of u."""
    domain = res.domain
    if center is None:
        center = domain.centers()[res.favorable].mean(axis=0)
    if boundary == "indicator":
        field_grid, level = res.mask.astype(float), 0.5
    elif boundary == "level":
        field_grid, level = domain.to_grid(res.solution.u, 0.0), superlevel_threshold(res)
    else:
        raise ValueError(f"unknown boundary mode {boundary!r}")
    return extract_polar_parametrization(domain, field_grid, center, res.eps, angular_res,
                                         level=level, raise_on_violation=False)


def _summarize(res: OptimizationResult, frac: float, lambda0, angular_res: int) -> SweepPoint:
    domain = res.domain
    diag = diagnostics(res, lambda0)
    try:
        param = polar_of_result(res, diag.barycenter, angular_res)
        l2, sup, star = param.l2, param.sup, param.star_shaped
    except ValueError:
        l2, sup, star = math.nan, math.nan, False
    return SweepPoint(res.eps, frac, domain.h, res.lam, diag, l2, sup, star, res.trace.status,
                      len(res.trace.records), res.trace.is_monotone(), res.trace)
