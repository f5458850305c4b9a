"""Discrete Dirichlet Laplacian, bang-bang weights and the principal eigenpair.

The principal eigenvalue of ``K u = lam M u`` (``K`` SPD, ``M`` diagonal and
possibly indefinite) is the smallest positive ``lam`` with a positive
eigenvector.  We compute it by inverse iteration on the SPD shifted matrix
``K - sigma M`` with ``0 <= sigma < lam``.  Positive definiteness of the
shifted matrix is certified from the pivots of a symmetric LU factorization,
which by Sylvester's law count the pencil eigenvalues in ``(0, sigma)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridDomain

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAXIT = 50000
SHIFT_MARGIN = 0.02


class NonConvergenceError(RuntimeError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float = math.nan, iterations: int = 0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class BangBangWeight:
    """Weight equal to ``mbar`` on the favorable DOFs and ``-munder`` elsewhere."""

    mbar: float
    munder: float
    favorable: np.ndarray  # boolean, one entry per DOF

    def __post_init__(self):
        if self.mbar <= 0 or self.munder <= 0:
            raise ValueError("mbar and munder must be positive")
        fav = np.asarray(self.favorable, dtype=bool).copy()
        fav.setflags(write=False)
        object.__setattr__(self, "favorable", fav)

    @classmethod
    def from_mask(cls, domain: GridDomain, mask: np.ndarray, mbar: float, munder: float) -> "BangBangWeight":
        """Accept either a DOF mask or a grid-shaped mask (checked against the domain)."""
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim == domain.dim and domain.dim > 1:
            mask = domain.dof_mask(mask)
        if mask.shape != (domain.ndof,):
            raise ValueError("favorable mask does not match the domain")
        return cls(mbar, munder, mask)

    @property
    def count(self) -> int:
        return int(self.favorable.sum())

    def measure(self, cell_volume: float) -> float:
        return self.count * cell_volume

    def values(self) -> np.ndarray:
        return np.where(self.favorable, self.mbar, -self.munder)


@dataclass(frozen=True)
class EigenSolution:
    lam: float  # math.inf when no positive principal eigenvalue exists
    u: np.ndarray
    normalization: str  # "l2" or "weighted"
    residual: float
    iterations: int
    shift: float = 0.0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lam)


def assemble_stiffness(domain: GridDomain) -> sp.csr_matrix:
    """Cell-centered (2N+1)-point Laplacian, scaled so ``u.K.u ~ int |grad u|^2``.

    Dirichlet conditions are imposed by dropping couplings to masked cells.
    """
    if domain.ndof == 0:
        raise ValueError("degenerate domain: no interior cells")
    N = domain.dim
    idx = domain.index
    rows, cols = [], []
    for axis in range(N):
        lo = [slice(None)] * N
        hi = [slice(None)] * N
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        a = idx[tuple(lo)]
        b = idx[tuple(hi)]
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = domain.ndof
    scale = domain.h ** (N - 2)
    off = sp.coo_matrix((np.full(rows.size, -scale), (rows, cols)), shape=(n, n))
    K = off + off.T + sp.identity(n, format="coo") * (2 * N * scale)
    K = K.tocsr()
    K.sort_indices()
    return K


def assemble_weight_mass(domain: GridDomain, weight: BangBangWeight) -> np.ndarray:
    """Diagonal of the weighted mass matrix, ``m_i h^N``."""
    if weight.favorable.shape != (domain.ndof,):
        raise ValueError("favorable set does not match the domain DOFs")
    return weight.values() * domain.cell_volume


def solve_spd(K, b: np.ndarray, tol: float = 1e-12, maxiter: int | None = None,
              method: str = "cg") -> np.ndarray:
    """Solve ``K x = b`` for SPD ``K``.

    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients;
    ``method="direct"`` uses a sparse LU factorization.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    K = sp.csr_matrix(K)
    if method == "direct":
        x = _factorize(K).solve(b)
    elif method == "cg":
        x = _jacobi_cg(K, b, tol, maxiter or 10 * K.shape[0] + 100)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(K @ x - b) / bnorm
    if res > tol:
        raise NonConvergenceError("solve_spd did not reach tolerance", res)
    return x


def _jacobi_cg(K, b, tol, maxiter):
    dinv = 1.0 / K.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    res = 1.0
    for it in range(1, maxiter + 1):
        Kp = K @ p
        alpha = rz / (p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        res = np.linalg.norm(r) / bnorm
        if res <= 0.1 * tol:
            return x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError("conjugate gradients hit maxiter", res, maxiter)


def _factorize(A):
    # symmetric ordering and no row pivoting: diag(U) carries the inertia of A
    return spla.splu(
        sp.csc_matrix(A),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )


def _factor_if_definite(A):
    """Return the LU factor of ``A`` if ``A`` is positive definite, else None."""
    try:
        lu = _factorize(A)
    except RuntimeError:  # exactly singular pivot
        return None
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise RuntimeError("factorization pivoted; inertia not available")
    d = lu.U.diagonal()
    if np.all(d > 0):
        return lu
    return None


def principal_eigenvalue(
    K,
    M: np.ndarray,
    tol: float = DEFAULT_TOL,
    maxit: int = DEFAULT_MAXIT,
    *,
    shift: float | None = None,
    v0: np.ndarray | None = None,
    cell_volume: float = 1.0,
    normalization: str = "l2",
) -> EigenSolution:
    """Positive principal eigenpair of ``K u = lam diag(M) u``.

    ``shift`` is an optional estimate of ``lam`` (e.g. from a neighbouring
    configuration); it only affects speed.  ``v0`` warm-starts the iteration.
    Returns ``lam = inf`` when ``u.M.u <= 0`` for every ``u``.
    """
    K = sp.csr_matrix(K)
    M = np.asarray(M, dtype=float)
    n = K.shape[0]
    if M.shape != (n,):
        raise ValueError("mass must be the diagonal vector of length ndof")
    if not np.any(M):
        raise ValueError("weight mass is identically zero")
    if normalization not in ("l2", "weighted"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if np.all(M <= 0):
        return EigenSolution(math.inf, np.zeros(n), normalization, 0.0, 0, 0.0)

    Md = sp.diags(M)
    knorm = spla.norm(K, 1)
    lu = None
    sigma = 0.0
    if shift is not None and math.isfinite(shift) and shift > 0:
        sigma = shift * (1.0 - SHIFT_MARGIN)
        for _ in range(6):
            lu = _factor_if_definite(K - sigma * Md)
            if lu is not None:
                break
            sigma *= 1.0 - 4 * SHIFT_MARGIN
    start = np.ones(n) if v0 is None else np.abs(np.asarray(v0, dtype=float))

    if lu is None:
        # cold start: Lanczos for the top of M u = mu K u in the K inner product
        lu0 = _factorize(K)
        Kinv = spla.LinearOperator((n, n), matvec=lu0.solve, dtype=float)
        mu, vec = spla.eigsh(Md, k=1, M=K, Minv=Kinv, which="LA", v0=start,
                             tol=1e-8, maxiter=max(maxit, 1000))
        mu = float(mu[0])
        if mu <= 1e-14 * np.abs(M).max() / knorm:
            return EigenSolution(math.inf, np.zeros(n), normalization, 0.0, 0, 0.0)
        start = np.abs(vec[:, 0])
        sigma = (1.0 - SHIFT_MARGIN) / mu
        lu = _factor_if_definite(K - sigma * Md)
        while lu is None:
            sigma *= 0.5
            if sigma < 1e-300:
                raise NonConvergenceError("could not certify a shift below the principal eigenvalue")
            lu = _factor_if_definite(K - sigma * Md)

    return _inverse_iteration(K, M, lu, sigma, start, tol, maxit, cell_volume, normalization)


def _inverse_iteration(K, M, lu, sigma, v, tol, maxit, cell_volume, normalization):
    v = v / math.sqrt(v @ (K @ v))
    lam_old = math.inf
    res = math.inf
    for it in range(1, maxit + 1):
        x = lu.solve(M * v)
        Kx = K @ x
        x_K = math.sqrt(x @ Kx)
        v = x / x_K
        Kv = Kx / x_K
        mvv = v @ (M * v)
        if mvv <= 0:
            lam = math.nan
        else:
            lam = 1.0 / mvv  # v is K-normalized
            res = np.linalg.norm(Kv - lam * (M * v)) / np.linalg.norm(Kv)
            if res <= tol and abs(lam - lam_old) <= tol * lam:
                break
        lam_old = lam
    else:
        raise NonConvergenceError("non-convergence of the principal eigenvalue", res, maxit)

    if not lam > sigma:
        raise NonConvergenceError("inverse iteration converged to a non-principal mode", res, it)
    u = v if v.sum() > 0 else -v
    if u.min() < -1e-10 * u.max():
        raise NonConvergenceError("eigenvector is not of one sign", res, it)
    if normalization == "l2":
        u = u / math.sqrt(cell_volume * (u @ u))
    else:
        u = u / math.sqrt(u @ (M * u))
    return EigenSolution(float(lam), u, normalization, float(res), it, float(sigma))


def rayleigh_quotient(K, M: np.ndarray, u: np.ndarray) -> float:
    return float(u @ (K @ u)) / float(u @ (M * u))


def export_triplets(A, path: str | Path) -> None:
    """Write a sparse matrix as ``row col value`` lines (17 significant digits)."""
    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")


def read_triplets(path: str | Path) -> sp.csr_matrix:
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
        nr, nc = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((nr, nc))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(nr, nc))


def solve_weighted_problem(domain: GridDomain, weight: BangBangWeight, K=None, **kwargs) -> EigenSolution:
    """Convenience wrapper: assemble and solve on a grid domain."""
    K = assemble_stiffness(domain) if K is None else K
    M = assemble_weight_mass(domain, weight)
    kwargs.setdefault("cell_volume", domain.cell_volume)
    return principal_eigenvalue(K, M, **kwargs)
