"""Nearly spherical sets around the unit-measure ball and their eigenvalue gap.

A set is described by its boundary radius ``r0 + phi(theta)``.  In the plane
``phi`` is a trigonometric polynomial; in three dimensions only zonal
perturbations (Legendre polynomials in ``cos theta``) are supported.  The
constant mode fixes the measure and the degree-one modes fix the barycenter.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .grid import GridDomain, ball_domain
from .modes import ModeTable, predicted_second_derivative
from .radial import sphere_area, unit_ball_radius
from .spectral import BangBangWeight, assemble_stiffness, assemble_weight_mass, principal_eigenvalue

log = logging.getLogger(__name__)

ANGULAR_NODES = 1024
NORMALIZE_TOL = 1e-12
NORMALIZE_SWEEPS = 20


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation ``amplitude * sum_k (a_k cos k theta + b_k sin k theta)``.

    ``modes`` maps ``(k, "cos" | "sin")`` to a coefficient (k >= 2).  In 3D the
    key is ``(k, "zonal")`` for the Legendre polynomial P_k(cos theta).
    ``degree_one`` adds raw degree-one content; it is only meaningful when the
    barycenter constraint is suspended.
    """

    modes: Mapping[tuple[int, str], float] = field(default_factory=dict)
    amplitude: float = 1.0
    N: int = 2
    degree_one: tuple[float, ...] = ()

    def __post_init__(self):
        if self.N not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        kinds = ("cos", "sin") if self.N == 2 else ("zonal",)
        for (k, kind) in self.modes:
            if k in (0, 1):
                raise ValueError("degrees 0 and 1 are reserved for normalization")
            if k < 0 or kind not in kinds:
                raise ValueError(f"invalid mode {(k, kind)!r} for N={self.N}")

    @classmethod
    def single(cls, ell: int, amplitude: float, kind: str = "cos", N: int = 2) -> "PerturbationSpec":
        return cls({(ell, kind if N == 2 else "zonal"): 1.0}, amplitude, N)

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0 or (
            all(v == 0 for v in self.modes.values()) and all(v == 0 for v in self.degree_one)
        )

    def record(self) -> dict:
        return {
            "N": self.N,
            "amplitude": self.amplitude,
            "modes": [[k, kind, v] for (k, kind), v in sorted(self.modes.items())],
            "degree_one": list(self.degree_one),
        }


# --- angular quadrature --------------------------------------------------

@dataclass(frozen=True)
class _Sphere:
    """Exact quadrature for the angular integrals of trigonometric/Legendre polynomials."""

    N: int
    nodes: np.ndarray  # theta (N=2) or cos(theta) (N=3)
    weights: np.ndarray

    @classmethod
    def make(cls, N: int, n: int) -> "_Sphere":
        if N == 2:
            return cls(2, 2 * np.pi * np.arange(n) / n, np.full(n, 2 * np.pi / n))
        x, w = legendre.leggauss(n)
        return cls(3, x, 2 * np.pi * w)

    def degree_one(self) -> list[np.ndarray]:
        if self.N == 2:
            return [np.cos(self.nodes), np.sin(self.nodes)]
        return [self.nodes.copy()]

    def integrate(self, f: np.ndarray) -> float:
        return float(self.weights @ f)


def _basis(N: int, key, angle: np.ndarray) -> np.ndarray:
    """Harmonic ``key = (k, kind)`` at angles (theta in 2D, cos(theta) in 3D)."""
    k, kind = key
    if kind == "cos":
        return np.cos(k * angle)
    if kind == "sin":
        return np.sin(k * angle)
    c = np.zeros(k + 1)
    c[k] = 1.0
    return legendre.legval(angle, c)


def _basis_derivative(N: int, key, angle: np.ndarray) -> np.ndarray:
    k, kind = key
    if kind == "cos":
        return -k * np.sin(k * angle)
    if kind == "sin":
        return k * np.cos(k * angle)
    # d/dtheta P_k(cos theta) = -sin(theta) P_k'(x)
    c = np.zeros(k + 1)
    c[k] = 1.0
    return -np.sqrt(np.clip(1 - angle**2, 0, None)) * legendre.legval(angle, legendre.legder(c))


def _degree_one_keys(N: int) -> list:
    return [(1, "cos"), (1, "sin")] if N == 2 else [(1, "zonal")]


@dataclass(frozen=True)
class NearlySphericalSet:
    N: int
    r0: float
    coefficients: dict  # (k, kind) -> coefficient, including (0, "const") and degree-one terms
    spec: PerturbationSpec = field(repr=False)
    sweeps: int = 0
    nodes: int = ANGULAR_NODES

    def phi(self, angle) -> np.ndarray:
        """Boundary perturbation at theta (2D) or cos(theta) (3D)."""
        angle = np.asarray(angle, dtype=float)
        out = np.zeros_like(angle)
        for key, c in self.coefficients.items():
            if key[1] == "const":
                out = out + c
            elif c != 0:
                out = out + c * _basis(self.N, key, angle)
        return out

    def dphi(self, angle) -> np.ndarray:
        angle = np.asarray(angle, dtype=float)
        out = np.zeros_like(angle)
        for key, c in self.coefficients.items():
            if key[1] != "const" and c != 0:
                out = out + c * _basis_derivative(self.N, key, angle)
        return out

    def boundary_radius(self, angle, t: float = 1.0) -> np.ndarray:
        """Boundary radius of A_t, (r0^N + t D)^{1/N}; A_1 = A."""
        D = self.volume_density(angle)
        bracket = self.r0**self.N + t * D
        if np.any(bracket <= 0):
            raise ValueError("deformation too large")
        return bracket ** (1.0 / self.N)

    def volume_density(self, angle) -> np.ndarray:
        """D = (r0 + phi)^N - r0^N."""
        return (self.r0 + self.phi(angle)) ** self.N - self.r0**self.N

    @functools.cached_property
    def _sphere(self) -> _Sphere:
        return _Sphere.make(self.N, self.nodes)

    @property
    def c0(self) -> float:
        return float(self.coefficients.get((0, "const"), 0.0))

    @property
    def degree_one_correction(self) -> list[float]:
        return [float(self.coefficients.get(k, 0.0)) for k in _degree_one_keys(self.N)]

    @property
    def measure(self) -> float:
        s = self._sphere
        return s.integrate((self.r0 + self.phi(s.nodes)) ** self.N) / self.N

    @property
    def barycenter(self) -> np.ndarray:
        s = self._sphere
        rr = (self.r0 + self.phi(s.nodes)) ** (self.N + 1) / (self.N + 1)
        return np.array([s.integrate(e * rr) for e in s.degree_one()])

    @property
    def l2_norm(self) -> float:
        """||phi|| in L^2 of the unit sphere."""
        s = self._sphere
        return math.sqrt(s.integrate(self.phi(s.nodes) ** 2))

    @property
    def sup_norm(self) -> float:
        s = self._sphere
        return float(np.abs(self.phi(s.nodes)).max())

    @property
    def c1_seminorm(self) -> float:
        s = self._sphere
        return float(np.abs(self.dphi(s.nodes)).max())

    def harmonic_coefficients(self) -> dict:
        """Coefficients of phi against the unit-sphere orthonormal basis (2D)."""
        if self.N != 2:
            raise NotImplementedError("orthonormal coefficients are implemented for N = 2")
        return spherical_coefficients(self.phi(self._sphere.nodes))

    def record(self) -> dict:
        return {
            "spec": self.spec.record(),
            "c0": self.c0,
            "degree_one": self.degree_one_correction,
            "phi_l2": self.l2_norm,
            "phi_sup": self.sup_norm,
            "phi_c1": self.c1_seminorm,
            "measure": self.measure,
        }


def normalize_volume_barycenter(spec: PerturbationSpec, *, fix_barycenter: bool = True,
                                nodes: int | None = None) -> NearlySphericalSet:
    """Add a constant and degree-one modes so that |A| = 1 and bar(A) = 0."""
    N = spec.N
    r0 = unit_ball_radius(N)
    if nodes is None:
        top = max([k for k, _ in spec.modes] + [1])
        nodes = ANGULAR_NODES if N == 2 else max(64, 4 * top)
        while N == 2 and nodes < 8 * top:
            nodes *= 2
    coeffs = {key: spec.amplitude * v for key, v in spec.modes.items()}
    for key, v in zip(_degree_one_keys(N), spec.degree_one):
        coeffs[key] = spec.amplitude * v
    coeffs[(0, "const")] = 0.0
    if fix_barycenter and any(coeffs.get(k, 0.0) for k in _degree_one_keys(N)):
        raise ValueError("degree-one content requires the barycenter constraint to be suspended")

    def make(c, sweeps=0):
        return NearlySphericalSet(N, r0, dict(c), spec, sweeps, nodes)

    if spec.is_zero:
        return make(coeffs)

    sphere = _Sphere.make(N, nodes)
    x = sphere.nodes
    e1 = sphere.degree_one()
    keys1 = _degree_one_keys(N)
    area = sphere_area(N)

    def residuals(c):
        phi = make(c).phi(x)
        vol = sphere.integrate((r0 + phi) ** N - r0**N) / (area * r0**N)
        mom = [sphere.integrate(e * ((r0 + phi) ** (N + 1) - r0 ** (N + 1))) / (area * r0 ** (N + 1)) for e in e1]
        return vol, np.array(mom), phi

    for sweep in range(1, NORMALIZE_SWEEPS + 1):
        # constant mode: mean of (r0 + c0 + psi)^N equals r0^N
        coeffs[(0, "const")] = 0.0
        psi = make(coeffs).phi(x)
        if N == 2:
            # psi has zero mean, so (r0 + c0)^2 + mean(psi^2) = r0^2
            disc = r0**2 - sphere.integrate(psi**2) / area
            if disc <= 0:
                raise ValueError("amplitude too large")
            coeffs[(0, "const")] = math.sqrt(disc) - r0
        else:
            f = lambda c0: sphere.integrate((r0 + c0 + psi) ** N - r0**N)
            coeffs[(0, "const")] = brentq(f, -r0 / 2 - 1e-12, r0 / 2, xtol=1e-16 * r0)
        if fix_barycenter:
            vol, mom, phi = residuals(coeffs)
            J = np.array([[(N + 1) * sphere.integrate(ei * ek * (r0 + phi) ** N) for ek in e1] for ei in e1])
            step = np.linalg.solve(J, mom * area * r0 ** (N + 1))
            for key, d in zip(keys1, step):
                coeffs[key] = coeffs.get(key, 0.0) - d
        vol, mom, phi = residuals(coeffs)
        if np.abs(phi).max() > r0 / 2:
            raise ValueError("amplitude too large: |phi| exceeds r0/2")
        if abs(vol) <= NORMALIZE_TOL and (not fix_barycenter or np.abs(mom).max() <= NORMALIZE_TOL):
            return make(coeffs, sweep)
    raise RuntimeError("normalization failure")


# --- vector field and deformation ---------------------------------------

def _polar(points: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Radius and angle variable (theta in 2D, cos(theta) in 3D)."""
    points = np.asarray(points, dtype=float)
    rho = np.linalg.norm(points, axis=-1)
    if N == 2:
        return rho, np.arctan2(points[..., 1], points[..., 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(rho > 0, points[..., 2] / np.where(rho > 0, rho, 1.0), 1.0)
    return rho, x


def vector_field_X(nss: NearlySphericalSet, rho, angle) -> np.ndarray:
    """Radial component of the divergence-free field X = D(theta) / (N rho^{N-1}) e_rho."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("rho must be positive")
    return nss.volume_density(angle) / (nss.N * rho ** (nss.N - 1))


def vector_field_X_cartesian(nss: NearlySphericalSet, points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    rho, angle = _polar(points, nss.N)
    return (vector_field_X(nss, rho, angle) / rho)[..., None] * points


def cutoff(rho, r0: float) -> np.ndarray:
    """C^2 quintic smoothstep: 1 on [3r0/4, 5r0/4], 0 outside (r0/2, 3r0/2)."""
    rho = np.asarray(rho, dtype=float)

    def step(s):
        s = np.clip(s, 0.0, 1.0)
        return s**3 * (10 - 15 * s + 6 * s * s)

    rise = step((rho - r0 / 2) / (r0 / 4))
    fall = step((3 * r0 / 2 - rho) / (r0 / 4))
    return np.minimum(rise, fall)


def deformation_map(nss: NearlySphericalSet, t: float, points) -> np.ndarray:
    """Phi(t, rho theta) = [rho^N + t h(rho) D(theta)]^{1/N} theta."""
    if not -0.5 <= t <= 1.0:
        raise ValueError("t must lie in [-0.5, 1]")
    points = np.asarray(points, dtype=float)
    N = nss.N
    rho, angle = _polar(points, N)
    bracket = rho**N + t * cutoff(rho, nss.r0) * nss.volume_density(angle)
    if np.any(bracket[rho > 0] <= 0) or np.any(bracket < 0):
        raise ValueError("deformation too large")
    new = bracket ** (1.0 / N)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(rho > 0, new / np.where(rho > 0, rho, 1.0), 1.0)
    return points * scale[..., None]


def mapped_ball_measure(nss: NearlySphericalSet, t: float) -> float:
    """Measure of Phi(t, B) from its boundary radius (the cutoff equals 1 on dB)."""
    s = nss._sphere
    rad = np.linalg.norm(deformation_map(nss, t, _sphere_points(s, nss.r0)), axis=-1)
    return s.integrate(rad**nss.N) / nss.N


def _sphere_points(s: _Sphere, radius: float) -> np.ndarray:
    if s.N == 2:
        return radius * np.stack([np.cos(s.nodes), np.sin(s.nodes)], axis=-1)
    st = np.sqrt(1 - s.nodes**2)
    return radius * np.stack([st, np.zeros_like(st), s.nodes], axis=-1)


def spherical_coefficients(trace: np.ndarray) -> dict:
    """Orthonormal Fourier coefficients on the unit circle of uniform samples.

    Keys are ``(k, 0)`` for cos / constant and ``(k, 1)`` for sin; the discrete
    Parseval identity holds exactly.
    """
    trace = np.asarray(trace, dtype=float)
    M = trace.size
    if M < 2 or M & (M - 1):
        raise ValueError("sample count must be a power of two")
    F = np.fft.rfft(trace)
    dtheta = 2 * np.pi / M
    out = {(0, 0): dtheta * F[0].real / math.sqrt(2 * np.pi)}
    for k in range(1, M // 2):
        out[(k, 0)] = dtheta * F[k].real / math.sqrt(np.pi)
        out[(k, 1)] = -dtheta * F[k].imag / math.sqrt(np.pi)
    out[(M // 2, 0)] = dtheta * F[M // 2].real / math.sqrt(2 * np.pi)
    return out


def normal_trace_coefficients(nss: NearlySphericalSet) -> dict:
    """Coefficients of X.n on dB, X.n = D / (N r0^{N-1}), in the unit-circle basis."""
    th = nss._sphere.nodes
    return spherical_coefficients(nss.volume_density(th) / (nss.N * nss.r0 ** (nss.N - 1)))


# --- eigenvalues on a truncated plane -------------------------------------

@dataclass(frozen=True)
class _PlaneGrid:
    domain: GridDomain
    K: object
    rho: np.ndarray
    angle: np.ndarray
    count: int  # cells of the unit-measure set


@functools.lru_cache(maxsize=2)
def _plane_grid(N: int, R: float, gridres: int) -> _PlaneGrid:
    domain = ball_domain(R, gridres, N)
    K = assemble_stiffness(domain)
    rho, angle = _polar(domain.centers(), N)
    return _PlaneGrid(domain, K, rho, angle, int(round(1.0 / domain.cell_volume)))


def rasterize(nss: NearlySphericalSet | None, R: float, gridres: int, t: float = 1.0,
              center=None, N: int = 2) -> np.ndarray:
    """DOF mask of A_t with exactly round(1/h^N) cells.

    Cells are ranked by |x - c| / rho_t(angle) (ties by cell index), so the
    favorable count matches the unit measure for every member of the family.
    """
    N = nss.N if nss is not None else N
    pg = _plane_grid(N, float(R), int(gridres))
    if center is not None and np.any(np.asarray(center) != 0):
        rho, angle = _polar(pg.domain.centers() - np.asarray(center, dtype=float), N)
    else:
        rho, angle = pg.rho, pg.angle
    if nss is None or (t == 0):
        score = rho
    else:
        score = rho / nss.boundary_radius(angle, t)
    order = np.lexsort((np.arange(score.size), score))
    mask = np.zeros(score.size, dtype=bool)
    mask[order[: pg.count]] = True
    return mask


def _lambda_on_mask(N, R, gridres, mask, mbar, munder, hint):
    pg = _plane_grid(N, float(R), int(gridres))
    weight = BangBangWeight(mbar, munder, mask)
    M = assemble_weight_mass(pg.domain, weight)
    sol = principal_eigenvalue(pg.K, M, shift=hint, cell_volume=pg.domain.cell_volume)
    return sol.lam


@functools.lru_cache(maxsize=8)
def ball_eigenvalue_on_plane(N: int, R: float, gridres: int, mbar: float = 1.0, munder: float = 1.0,
                             hint: float | None = None) -> float:
    mask = rasterize(None, R, gridres, N=N)
    return _lambda_on_mask(N, R, gridres, mask, mbar, munder, hint)


def check_truncation(N: int, R: float, gridres: int, lambda0: float, munder: float = 1.0,
                     check_resolution: bool = True) -> None:
    r0 = unit_ball_radius(N)
    decay = 1.0 / math.sqrt(lambda0 * munder)
    if R < r0 + 6 * decay * (1 - 1e-9):
        raise ValueError(f"R={R:.4g} is shorter than r0 + 6 decay lengths")
    h = 2 * R / gridres
    if check_resolution and h > r0 / 64:
        raise ValueError(f"grid too coarse: h={h:.4g} > r0/64")


def eigenvalue_on_plane(nss: NearlySphericalSet, R: float, gridres: int, *, t: float = 1.0,
                        mbar: float = 1.0, munder: float = 1.0, lambda0: float | None = None,
                        center=None, check_resolution: bool = True) -> tuple[float, float]:
    """(lambda(A_t), lambda(B)) in the Dirichlet ball B_R on the same grid."""
    N = nss.N
    if lambda0 is not None:
        check_truncation(N, R, gridres, lambda0, munder, check_resolution)
    lam_B = ball_eigenvalue_on_plane(N, float(R), int(gridres), mbar, munder, lambda0)
    if (nss.spec.is_zero or t == 0) and center is None:
        return lam_B, lam_B
    mask = rasterize(nss, R, gridres, t, center)
    lam_A = _lambda_on_mask(N, R, gridres, mask, mbar, munder, lam_B)
    return lam_A, lam_B


@dataclass(frozen=True)
class AsymmetryRecord:
    spec: dict
    R: float
    gridres: int
    lambdaA: float
    lambdaB: float
    gap: float
    phi_l2: float
    ratio: float
    prediction: float
    noise_floor: float
    status: str  # "ok" or "inconclusive"

    def record(self) -> dict:
        return dict(self.__dict__)


def harmonic_prediction(nss: NearlySphericalSet, table: ModeTable) -> float:
    """Second-order prediction of gap / ||phi||^2 from the harmonic content of phi."""
    coeffs = {k: c for k, c in nss.harmonic_coefficients().items() if k[0] >= 1 and abs(c) > 0}
    lmax = max(table.degrees)
    top = max((k[0] for k, c in coeffs.items() if abs(c) > 1e-12 * nss.l2_norm), default=1)
    if top > lmax:
        raise KeyError(f"degree {top} not solved")
    coeffs = {k: c for k, c in coeffs.items() if k[0] <= lmax}
    norm2 = sum(c * c for c in coeffs.values())
    if norm2 == 0:
        return math.nan
    return float(0.5 * predicted_second_derivative(coeffs, table, measure="sphere") / norm2)


def asymmetry_ratio(nss: NearlySphericalSet, R: float, gridres: int, table: ModeTable | None = None,
                    *, noise: bool = True, mbar: float = 1.0, munder: float = 1.0,
                    lambda0: float | None = None, check_resolution: bool = True) -> AsymmetryRecord:
    """gap / ||phi||^2 with a grid-noise floor from the half-resolution gap."""
    lam_A, lam_B = eigenvalue_on_plane(nss, R, gridres, mbar=mbar, munder=munder, lambda0=lambda0,
                                       check_resolution=check_resolution)
    gap = lam_A - lam_B
    norm2 = nss.l2_norm**2
    floor = 0.0
    if noise and norm2 > 0:
        a2, b2 = eigenvalue_on_plane(nss, R, gridres // 2, mbar=mbar, munder=munder)
        floor = abs(gap - (a2 - b2))
    ratio = gap / norm2 if norm2 > 0 else math.nan
    pred = harmonic_prediction(nss, table) if table is not None and norm2 > 0 else math.nan
    status = "ok" if norm2 == 0 or gap > floor else "inconclusive"
    return AsymmetryRecord(nss.spec.record(), float(R), int(gridres), lam_A, lam_B, gap,
                           math.sqrt(norm2), ratio, pred, floor, status)


@dataclass(frozen=True)
class PathDerivatives:
    h_t: float
    t: np.ndarray
    lambdas: np.ndarray
    d1: float
    d2: float
    prediction: float
    method: str

    def record(self) -> dict:
        return dict(self.__dict__)


def fd_derivatives_along_path(nss: NearlySphericalSet, h_t: float, R: float, gridres: int,
                              table: ModeTable | None = None, *, method: str = "stencil",
                              mbar: float = 1.0, munder: float = 1.0,
                              lambda0: float | None = None, check_resolution: bool = True) -> PathDerivatives:
    """First and second t-derivatives of lambda(A_t) at t = 0 from five samples.

    ``method="stencil"`` uses fourth-order central differences;
    ``method="lsq"`` fits a cubic in t by least squares, which damps
    rasterization noise at the cost of an O(h_t^2) bias.
    """
    if not 0.05 <= h_t <= 0.25:
        raise ValueError("h_t must lie in [0.05, 0.25]")
    ts = h_t * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    th = nss._sphere.nodes
    for t in (ts[0], ts[-1]):
        nss.boundary_radius(th, t)  # raises when the path leaves the valid range
    lams = np.array([eigenvalue_on_plane(nss, R, gridres, t=float(t), mbar=mbar, munder=munder,
                                         lambda0=lambda0, check_resolution=check_resolution)[0] for t in ts])
    if method == "stencil":
        d1 = (lams[0] - 8 * lams[1] + 8 * lams[3] - lams[4]) / (12 * h_t)
        d2 = (-lams[0] + 16 * lams[1] - 30 * lams[2] + 16 * lams[3] - lams[4]) / (12 * h_t**2)
    elif method == "lsq":
        c = np.polynomial.polynomial.polyfit(ts, lams, 3)
        d1, d2 = c[1], 2 * c[2]
    else:
        raise ValueError(f"unknown method {method!r}")
    pred = math.nan
    if table is not None:
        coeffs = {k: v for k, v in normal_trace_coefficients(nss).items() if k[0] >= 1 and k[0] <= max(table.degrees)}
        pred = predicted_second_derivative(coeffs, table, measure="sphere")
    return PathDerivatives(h_t, ts, lams, float(d1), float(d2), pred, method)


def battery(amplitude_fraction: float = 0.08) -> dict[str, PerturbationSpec]:
    """Standard perturbations: degree 2, degree 3 and a mixed case."""
    s = amplitude_fraction * unit_ball_radius(2)
    return {
        "l2": PerturbationSpec({(2, "cos"): 1.0}, s),
        "l3": PerturbationSpec({(3, "cos"): 1.0}, s),
        "mixed": PerturbationSpec({(2, "cos"): 1.0, (3, "sin"): 1.0}, s),
    }
