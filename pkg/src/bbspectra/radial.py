"""Radial limit problem on R^N: the eigenpair (lambda0, w) for a unit-measure ball.

The favorable set is the ball ``B`` of measure one and radius ``r0``; the
weight is ``mbar`` inside and ``-munder`` outside.  Radial solutions of
``g'' + (N-1)/r g' + (lam m(r) - sigma/r^2) g = 0`` are integrated with a
fixed-step RK4 scheme written as a product of 2x2 step propagators, so the
shooting defect can be evaluated by a vectorized product and the full
profile by a short scalar loop.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import io

log = logging.getLogger(__name__)

J01 = 2.404825557695773  # first zero of J0
STEPS_PER_LENGTH = 2000
SERIES_NODES = 10


def unit_ball_radius(N: int) -> float:
    """Radius of the ball of unit volume in R^N."""
    if N < 1:
        raise ValueError("dimension must be >= 1")
    vol = math.pi ** (N / 2) / math.gamma(N / 2 + 1)
    return vol ** (-1.0 / N)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1}."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


def first_dirichlet_zero(N: int) -> float:
    """First positive zero of the radial Dirichlet eigenfunction of the unit ball."""
    if N == 1:
        return math.pi / 2
    if N == 2:
        return J01
    if N == 3:
        return math.pi
    raise ValueError("only N <= 3 is supported")


# --- propagators ---------------------------------------------------------

def _step_propagators(r: np.ndarray, N: int, q: float, sigma: float) -> np.ndarray:
    """RK4 propagators P_i with y(r[i+1]) = P_i y(r[i]) for y = (g, g').

    ``q`` is ``lam * m`` on the leg (constant), ``r`` strictly monotone and > 0.
    """
    h = np.diff(r)
    rm = r[:-1] + 0.5 * h

    def A(x):
        out = np.zeros((x.size, 2, 2))
        out[:, 0, 1] = 1.0
        out[:, 1, 0] = -(q - sigma / x**2)
        out[:, 1, 1] = -(N - 1) / x
        return out

    I = np.eye(2)
    hh = h[:, None, None]
    A1, A2, A3 = A(r[:-1]), A(rm), A(r[1:])
    K1 = A1
    K2 = A2 @ (I + 0.5 * hh * K1)
    K3 = A2 @ (I + 0.5 * hh * K2)
    K4 = A3 @ (I + hh * K3)
    return I + hh / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)


def _compose(P: np.ndarray) -> np.ndarray:
    """Ordered product P[n-1] @ ... @ P[0] by pairwise reduction."""
    while P.shape[0] > 1:
        n = P.shape[0]
        paired = P[1 : n - n % 2 : 2] @ P[0 : n - n % 2 : 2]
        P = np.concatenate([paired, P[n - 1 :]]) if n % 2 else paired
    return P[0]


def _sweep(P: np.ndarray, y0: tuple[float, float]) -> np.ndarray:
    """All intermediate states of the propagation, shape ``(n+1, 2)``."""
    coeffs = P.reshape(-1, 4).tolist()
    g, dg = float(y0[0]), float(y0[1])
    out = [(g, dg)]
    for a, b, c, d in coeffs:
        g, dg = a * g + b * dg, c * g + d * dg
        out.append((g, dg))
    return np.array(out)


def regular_exponent(N: int, sigma: float) -> float:
    """Root alpha >= 0 of alpha (alpha + N - 2) = sigma."""
    if N == 1 and sigma == 0:
        return 0.0  # even solution; the other root gives the odd one
    c = (N - 2) / 2
    return -c + math.sqrt(c * c + sigma)


def _series(r: np.ndarray, N: int, q: float, alpha: float) -> np.ndarray:
    """Regular solution r^alpha * sum a_k r^{2k} (a_0 = 1) and its derivative."""
    g = np.zeros_like(r)
    dg = np.zeros_like(r)
    a = 1.0
    for k in range(60):
        p = 2 * k + alpha
        g += a * r**p
        if p > 0:
            with np.errstate(divide="ignore"):
                dg += a * p * r ** (p - 1)
        a = -q * a / ((2 * k + 2) * (2 * k + 2 + 2 * alpha + N - 2))
        if abs(a) * max(r.max(), 1e-300) ** (2 * k + 2 + alpha) < 1e-18 * max(abs(g).max(), 1e-300):
            break
    return np.stack([g, dg], axis=1)


def _decay_log_derivative(r: float, N: int, kappa: float, sigma: float) -> float:
    """Log-derivative of the decaying solution r^{-(N-2)/2} K_nu(kappa r).

    Uses the large-argument expansion of K_nu truncated at its smallest term.
    """
    nu = math.sqrt(sigma + ((N - 2) / 2) ** 2)
    z = kappa * r
    mu = 4 * nu * nu
    # S(z) = sum t_k z^-k, S'(z) = sum -k t_k z^-k-1
    t, S, dS = 1.0, 1.0, 0.0
    for k in range(1, 30):
        t_next = t * (mu - (2 * k - 1) ** 2) / (8 * k) / z
        if abs(t_next) >= abs(t):
            break
        t = t_next
        S += t
        dS += -k * t / z
    return -kappa - (N - 1) / (2 * r) + kappa * dS / S


# --- radial grids --------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Nodes on [0, r0] and [r0, R] with r0 as a shared node."""

    inner: np.ndarray
    outer: np.ndarray

    @classmethod
    def build(cls, r0: float, R: float, step: float) -> "RadialGrid":
        n_in = max(int(math.ceil(r0 / step)), 4 * SERIES_NODES)
        n_out = max(int(math.ceil((R - r0) / step)), 8)
        inner = r0 * np.arange(n_in + 1) / n_in
        outer = r0 + (R - r0) * np.arange(n_out + 1) / n_out
        inner[-1] = outer[0] = r0
        return cls(inner, outer)

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.inner, self.outer[1:]])


@dataclass(frozen=True)
class _Legs:
    """Propagators for one (lam, sigma) on a RadialGrid."""

    grid: RadialGrid
    N: int
    lam: float
    mbar: float
    munder: float
    sigma: float

    def inner_start(self) -> np.ndarray:
        rs = self.grid.inner[: SERIES_NODES + 1]
        return _series(rs, self.N, self.lam * self.mbar, regular_exponent(self.N, self.sigma))

    def inner_P(self) -> np.ndarray:
        return _step_propagators(self.grid.inner[SERIES_NODES:], self.N, self.lam * self.mbar, self.sigma)

    def outer_P(self) -> np.ndarray:
        r = self.grid.outer[::-1]
        return _step_propagators(r, self.N, -self.lam * self.munder, self.sigma)

    def outer_seed(self, dirichlet: bool) -> tuple[float, float]:
        if dirichlet:
            return (0.0, -1.0)
        R = float(self.grid.outer[-1])
        kappa = math.sqrt(self.lam * self.munder)
        return (1.0, _decay_log_derivative(R, self.N, kappa, self.sigma))

    def inner_end(self) -> np.ndarray:
        y = self.inner_start()[-1]
        return _compose(self.inner_P()) @ y

    def outer_end(self, dirichlet: bool) -> np.ndarray:
        return _compose(self.outer_P()) @ np.array(self.outer_seed(dirichlet))

    def inner_profile(self) -> np.ndarray:
        head = self.inner_start()
        tail = _sweep(self.inner_P(), head[-1])
        return np.concatenate([head[:-1], tail])

    def outer_profile(self, dirichlet: bool) -> np.ndarray:
        """Outer solution on ascending nodes r0..R."""
        return _sweep(self.outer_P(), self.outer_seed(dirichlet))[::-1]


def _matching_defect(grid, N, lam, mbar, munder, dirichlet) -> float:
    legs = _Legs(grid, N, lam, mbar, munder, 0.0)
    gi, dgi = legs.inner_end()
    go, dgo = legs.outer_end(dirichlet)
    r0 = grid.inner[-1]
    # scaled Wronskian: zero iff the log-derivatives agree at r0
    return r0 * (dgi * go - gi * dgo) / (abs(gi * go) + abs(gi * dgo) * r0 + abs(dgi * go) * r0)


# --- profile -------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    N: int
    mbar: float
    munder: float
    r0: float
    R: float
    r: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    dw: np.ndarray = field(repr=False)
    lambda0: float = math.nan
    normalization: str = "l2"  # "l2": int w^2 = 1; "weighted": int m w^2 = 1
    i0: int = 0  # index of r0; w and dw at i0 are inner (left) values
    dw_outer_r0: float = math.nan
    step: float = math.nan

    @property
    def decay_length(self) -> float:
        return 1.0 / math.sqrt(self.lambda0 * self.munder)

    @property
    def w_r0(self) -> float:
        return float(self.w[self.i0])

    @property
    def matching_defect(self) -> float:
        """Relative C^1 mismatch at r0 (the returned profile is continuous by construction)."""
        a, b = self.dw[self.i0], self.dw_outer_r0
        return abs(a - b) / max(abs(a), abs(b))

    def integral(self, f: np.ndarray, inner: float = 1.0, outer: float = 1.0) -> float:
        """Integral over B_R of a radial function, scaled by ``inner``/``outer`` on each leg.

        Simpson's rule on each leg separately, so a jump at r0 is resolved.
        """
        dens = f * sphere_area(self.N) * self.r ** (self.N - 1)
        i = self.i0
        return float(inner * simpson(dens[: i + 1], x=self.r[: i + 1]) + outer * simpson(dens[i:], x=self.r[i:]))

    def normalized(self, tag: str) -> "RadialProfile":
        if tag == "l2":
            norm2 = self.integral(self.w**2)
        elif tag == "weighted":
            norm2 = self.integral(self.w**2, self.mbar, -self.munder)
        else:
            raise ValueError(f"unknown normalization {tag!r}")
        c = 1.0 / math.sqrt(norm2)
        return replace(self, w=self.w * c, dw=self.dw * c, dw_outer_r0=self.dw_outer_r0 * c, normalization=tag)

    def __call__(self, rho) -> np.ndarray:
        """Cubic Hermite interpolation of w; zero beyond R."""
        rho = np.abs(np.asarray(rho, dtype=float))
        r, w, dw = self.r, self.w, self.dw.copy()
        inner = CubicHermiteSpline(r[: self.i0 + 1], w[: self.i0 + 1], dw[: self.i0 + 1])
        douter = dw[self.i0 :].copy()
        douter[0] = self.dw_outer_r0
        outer = CubicHermiteSpline(r[self.i0 :], w[self.i0 :], douter)
        out = np.where(rho <= self.r0, inner(np.minimum(rho, self.r0)), outer(np.clip(rho, self.r0, self.R)))
        return np.where(rho > self.R, 0.0, out)

    def record(self) -> dict:
        return {
            "N": self.N,
            "mbar": self.mbar,
            "munder": self.munder,
            "r0": self.r0,
            "lambda0": self.lambda0,
            "R": self.R,
            "norm_tag": self.normalization,
            "w_r0": self.w_r0,
            "decay_length": self.decay_length,
        }

    def write_csv(self, path: str | Path, config_hash: str | None = None) -> None:
        rows = zip(self.r.tolist(), self.w.tolist())
        io.write_csv(path, ["r", "w"], rows, config_hash)

    def write_json(self, path: str | Path, extra: dict | None = None) -> None:
        rec = self.record()
        rec.update(extra or {})
        io.write_json(path, rec)


def _check_params(N, mbar, munder):
    if N not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if not (mbar > 0 and munder > 0):
        raise ValueError("mbar and munder must be positive")


def _step_length(N, mbar, munder, resolution):
    r0 = unit_ball_radius(N)
    lam_hi = first_dirichlet_zero(N) ** 2 / (mbar * r0**2)
    # decay length at the bracket top is a lower bound for the true one
    return min(r0, 1.0 / math.sqrt(lam_hi * munder)) / resolution


def _shoot(N, mbar, munder, R, dirichlet, resolution, tol):
    r0 = unit_ball_radius(N)
    grid = RadialGrid.build(r0, R, _step_length(N, mbar, munder, resolution))
    lam_hi = first_dirichlet_zero(N) ** 2 / (mbar * r0**2)
    lo, hi = 1e-8 * lam_hi, lam_hi * (1 - 1e-9)
    f = lambda lam: _matching_defect(grid, N, lam, mbar, munder, dirichlet)
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise RuntimeError(f"bracket failure: defect {flo:.3e} at {lo:.3e}, {fhi:.3e} at {hi:.3e}")
    lam, info = brentq(f, lo, hi, xtol=tol * lam_hi * 1e-3, rtol=4 * np.finfo(float).eps,
                       maxiter=200, full_output=True, disp=False)
    if not info.converged:
        raise RuntimeError("shooting did not reach tolerance")
    return grid, lam


def _assemble(grid, N, lam, mbar, munder, dirichlet, R, resolution):
    legs = _Legs(grid, N, lam, mbar, munder, 0.0)
    inner = legs.inner_profile()
    outer = legs.outer_profile(dirichlet)
    c = inner[-1, 0] / outer[0, 0]
    outer = outer * c
    r = grid.nodes
    w = np.concatenate([inner[:, 0], outer[1:, 0]])
    dw = np.concatenate([inner[:, 1], outer[1:, 1]])
    return RadialProfile(
        N=N, mbar=mbar, munder=munder, r0=float(grid.inner[-1]), R=float(R),
        r=r, w=w, dw=dw, lambda0=float(lam), normalization="raw",
        i0=grid.inner.size - 1, dw_outer_r0=float(outer[0, 1]),
        step=_step_length(N, mbar, munder, resolution),
    )


def solve_limit_eigen(
    N: int = 2,
    mbar: float = 1.0,
    munder: float = 1.0,
    R: float | None = None,
    tol: float = 1e-12,
    *,
    normalization: str = "weighted",
    resolution: int = STEPS_PER_LENGTH,
    decay_lengths: float = 12.0,
) -> RadialProfile:
    """Limit eigenpair on R^N, truncated at radius ``R``.

    ``R`` defaults to ``r0 + decay_lengths / sqrt(lam0 munder)`` and is
    enlarged when it is shorter than six decay lengths past ``r0``.
    """
    _check_params(N, mbar, munder)
    r0 = unit_ball_radius(N)
    lam_hi = first_dirichlet_zero(N) ** 2 / (mbar * r0**2)
    if R is not None and R <= r0:
        raise ValueError(f"R={R} must exceed r0={r0}")
    lengths = decay_lengths if R is None else 6.0
    lam = 0.5 * lam_hi
    R_run = math.nan
    for _ in range(6):
        need = r0 + lengths / math.sqrt(lam * munder)
        target = R if R is not None and R >= need else need
        if math.isclose(target, R_run, rel_tol=1e-6):
            break
        R_run = target
        grid, lam = _shoot(N, mbar, munder, R_run, False, resolution, tol)
    if R is not None and R_run > R:
        log.info("enlarged R from %g to %g", R, R_run)
    prof = _assemble(grid, N, lam, mbar, munder, False, R_run, resolution)
    return prof.normalized(normalization)


def lambda_finite_ball(N: int, mbar: float, munder: float, R: float, tol: float = 1e-13,
                       *, resolution: int = STEPS_PER_LENGTH) -> float:
    """Principal eigenvalue of the unit-measure ball inside the Dirichlet ball B_R."""
    _check_params(N, mbar, munder)
    r0 = unit_ball_radius(N)
    if R <= r0:
        raise ValueError(f"R={R} must exceed r0={r0}")
    _, lam = _shoot(N, mbar, munder, R, True, resolution, tol)
    return float(lam)


def finite_ball_profile(N: int, mbar: float, munder: float, R: float, *,
                        normalization: str = "l2", resolution: int = STEPS_PER_LENGTH) -> RadialProfile:
    _check_params(N, mbar, munder)
    grid, lam = _shoot(N, mbar, munder, R, True, resolution, 1e-13)
    return _assemble(grid, N, lam, mbar, munder, True, R, resolution).normalized(normalization)


@dataclass(frozen=True)
class GapFit:
    slope: float
    intercept: float
    pair_slopes: np.ndarray
    target: float | None = None

    @property
    def relative_error(self) -> float:
        if self.target is None:
            return math.nan
        return abs(self.slope - self.target) / abs(self.target)


def fit_gap_rate(samples, lambda0: float, noise: float | None = None,
                 target: float | None = None) -> GapFit:
    """Least-squares slope of log(Lambda(R) - lambda0) against R."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4:
        raise ValueError("need at least 4 samples")
    R, lam = data[:, 0], data[:, 1]
    gap = lam - lambda0
    floor = 10 * 1e-13 * abs(lambda0) if noise is None else noise
    if np.any(gap <= floor):
        raise ValueError("resolution exceeded: gap below noise floor")
    y = np.log(gap)
    slope, intercept = np.polyfit(R, y, 1)
    pairs = np.diff(y) / np.diff(R)
    return GapFit(float(slope), float(intercept), pairs, target)


def decay_rate(profile: RadialProfile, min_lengths: float = 8.0) -> float:
    """Fitted slope of log(w r^{(N-1)/2}) on the outer third of the grid."""
    if profile.R < profile.r0 + min_lengths * profile.decay_length * (1 - 1e-9):
        raise ValueError("profile does not extend far enough past r0")
    r, w = profile.r, profile.w
    start = profile.r0 + 2.0 * (profile.R - profile.r0) / 3.0
    sel = (r >= start) & (w > 1e-250)
    if sel.sum() < 3:
        raise ValueError("profile underflows on the fitting window")
    y = np.log(w[sel] * r[sel] ** ((profile.N - 1) / 2))
    return float(np.polyfit(r[sel], y, 1)[0])


def gap_samples(N: int, mbar: float, munder: float, lambda0: float,
                lengths=(2, 4, 6, 8, 10)) -> list[tuple[float, float]]:
    """(R, Lambda(R)) at R = r0 + k decay lengths."""
    r0 = unit_ball_radius(N)
    d = 1.0 / math.sqrt(lambda0 * munder)
    return [(r0 + k * d, lambda_finite_ball(N, mbar, munder, r0 + k * d)) for k in lengths]
