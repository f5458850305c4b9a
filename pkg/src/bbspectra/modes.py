"""Spherical-harmonic components of the shape derivative at the limit ball.

For each degree ``ell`` the profile ``g`` solves the separated equation
``g'' + (N-1)/r g' + (lam0 m(r) - sigma/r^2) g = 0`` off ``r0``, is regular at
the origin and decaying at infinity, is continuous across ``r0`` and has the
derivative jump ``g'(r0-) - g'(r0+) = j`` with ``j = lam0 (mbar + munder) w(r0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.integrate import simpson

from . import io
from .radial import RadialGrid, RadialProfile, _Legs


def laplace_beltrami_eigenvalue(N: int, ell: int) -> float:
    if ell < 0:
        raise ValueError("degree must be non-negative")
    return float(ell * (ell + N - 2))


@dataclass(frozen=True)
class ModeProfile:
    sigma: float
    r: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    dg: np.ndarray = field(repr=False)  # left derivative at r0
    dg_outer_r0: float = math.nan
    i0: int = 0

    @property
    def g_r0(self) -> float:
        return float(self.g[self.i0])

    @property
    def jump(self) -> float:
        return float(self.dg[self.i0] - self.dg_outer_r0)


def _profile_grid(profile: RadialProfile) -> RadialGrid:
    return RadialGrid(profile.r[: profile.i0 + 1], profile.r[profile.i0 :])


def jump_constant(profile: RadialProfile) -> float:
    if profile.normalization != "weighted":
        raise ValueError("shape-derivative quantities need the weighted normalization")
    return profile.lambda0 * (profile.mbar + profile.munder) * profile.w_r0


def solve_mode(profile: RadialProfile, sigma: float) -> ModeProfile:
    """Transmission solution for the Laplace-Beltrami eigenvalue ``sigma``."""
    j = jump_constant(profile)
    legs = _Legs(_profile_grid(profile), profile.N, profile.lambda0, profile.mbar, profile.munder, float(sigma))
    inner = legs.inner_profile()
    outer = legs.outer_profile(dirichlet=False)
    a11, a12 = inner[-1, 0], -outer[0, 0]
    a21, a22 = inner[-1, 1], -outer[0, 1]
    det = a11 * a22 - a12 * a21
    scale = abs(a11 * a22) + abs(a12 * a21)
    if abs(det) < 1e-12 * scale:
        raise RuntimeError(f"resonant mode at sigma={sigma}")
    A = -a12 * j / det
    B = a11 * j / det
    g = np.concatenate([A * inner[:, 0], B * outer[1:, 0]])
    dg = np.concatenate([A * inner[:, 1], B * outer[1:, 1]])
    return ModeProfile(float(sigma), profile.r, g, dg, float(B * outer[0, 1]), profile.i0)


@dataclass(frozen=True)
class ModeTable:
    N: int
    profile: RadialProfile = field(repr=False)
    jump: float
    modes: dict = field(repr=False)  # degree -> ModeProfile

    @property
    def degrees(self) -> list[int]:
        return sorted(self.modes)

    def g_r0(self, ell: int) -> float:
        if ell not in self.modes:
            raise KeyError(f"degree {ell} not solved")
        return self.modes[ell].g_r0

    @property
    def coercivity(self) -> float:
        return coercivity_constant(self)

    def single_mode_ratio(self, ell: int) -> float:
        """Predicted gap / ||phi||^2 on S^{N-1} for a pure degree-``ell`` perturbation.

        Half the second derivative (the gap is lam'' / 2 to second order),
        with the r0^{N-1} factor converting boundary to sphere measure.
        """
        return 0.5 * predicted_second_derivative({ell: 1.0}, self, measure="sphere")

    def record(self) -> dict:
        return {
            "N": self.N,
            "mbar": self.profile.mbar,
            "munder": self.profile.munder,
            "lambda0": self.profile.lambda0,
            "r0": self.profile.r0,
            "w_r0": self.profile.w_r0,
            "j": self.jump,
            "C": coercivity_constant(self) if {1, 2} <= set(self.modes) else None,
            "modes": [{"ell": l, "sigma": self.modes[l].sigma, "g_r0": self.g_r0(l)} for l in self.degrees],
        }

    def write_csv(self, path: str | Path, config_hash: str | None = None) -> None:
        rows = [(l, self.modes[l].sigma, self.g_r0(l)) for l in self.degrees]
        io.write_csv(path, ["ell", "sigma", "g_r0"], rows, config_hash)

    def write_json(self, path: str | Path, extra: dict | None = None) -> None:
        rec = self.record()
        rec.update(extra or {})
        io.write_json(path, rec)


def mode_table(profile: RadialProfile, lmax: int = 6) -> ModeTable:
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    modes = {l: solve_mode(profile, laplace_beltrami_eigenvalue(profile.N, l)) for l in range(1, lmax + 1)}
    return ModeTable(profile.N, profile, jump_constant(profile), modes)


def coercivity_constant(table: ModeTable) -> float:
    """C = 2 j (g_1(r0) - g_2(r0))."""
    C = 2.0 * table.jump * (table.g_r0(1) - table.g_r0(2))
    if not C > 0:
        raise RuntimeError(f"non-positive coercivity constant {C}")
    return C


def _degree(key) -> int:
    return int(key[0]) if isinstance(key, tuple) else int(key)


def predicted_second_derivative(coeffs: Mapping, table: ModeTable, measure: str = "boundary") -> float:
    """Second derivative of the eigenvalue along the volume-preserving path.

    ``coeffs`` maps a degree (or a ``(degree, index)`` pair) to the coefficient
    of X.n against an orthonormal harmonic.  With ``measure="boundary"`` the
    basis is orthonormal in L^2 of the sphere of radius r0; with
    ``measure="sphere"`` it is orthonormal on the unit sphere, and the sum picks
    up the factor r0^{N-1}.
    """
    if measure not in ("boundary", "sphere"):
        raise ValueError(f"unknown measure {measure!r}")
    g1 = table.g_r0(1)
    total = 0.0
    norm2 = sum(float(c) ** 2 for c in coeffs.values())
    for key, c in coeffs.items():
        ell = _degree(key)
        if ell == 0:
            if abs(c) > 1e-8 * max(1.0, math.sqrt(norm2)):
                raise ValueError("degree-0 coefficient must vanish on a volume-preserving path")
            continue
        if ell not in table.modes:
            raise KeyError(f"degree {ell} not solved")
        total += (g1 - table.g_r0(ell)) * float(c) ** 2
    out = 2.0 * table.jump * total
    if measure == "sphere":
        out *= table.profile.r0 ** (table.N - 1)
    return out


def _leg_integral(f: np.ndarray, r: np.ndarray, i0: int) -> float:
    return float(simpson(f[: i0 + 1], x=r[: i0 + 1]) + simpson(f[i0:], x=r[i0:]))


def sturm_residual(table: ModeTable, h: int = 1, k: int = 2) -> float:
    """Relative residual of the Sturm identity between degrees ``h`` and ``k``.

    (s_k - s_h) int r^{N-3} g_h g_k + r0^{N-1} j (g_k(r0) - g_h(r0))
        = [r^{N-1}(g_h g_k' - g_k g_h')] from 0 to R.
    """
    mh, mk = table.modes[h], table.modes[k]
    r, N, i0 = mh.r, table.N, mh.i0
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(r > 0, r ** (N - 3.0) * mh.g * mk.g, 0.0)
    integral = (mk.sigma - mh.sigma) * _leg_integral(dens, r, i0)
    jump_term = table.profile.r0 ** (N - 1) * table.jump * (mk.g_r0 - mh.g_r0)
    R = r[-1]
    boundary = R ** (N - 1) * (mh.g[-1] * mk.dg[-1] - mk.g[-1] * mh.dg[-1])
    scale = max(abs(integral), abs(jump_term), abs(boundary))
    return abs(integral + jump_term - boundary) / scale
