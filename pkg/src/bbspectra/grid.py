"""Masked Cartesian grids for Dirichlet problems on bounded domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

Predicate = Callable[..., np.ndarray]


@dataclass(frozen=True)
class GridDomain:
    """Cell-centered grid with an inside mask and a DOF numbering.

    Cells are cubes of side ``h``; cell ``(i, j[, k])`` has its center at
    ``lower + (index + 0.5) * h``.  Cells outside the mask carry no degree of
    freedom and act as homogeneous Dirichlet data.
    """

    h: float
    lower: np.ndarray
    inside: np.ndarray
    index: np.ndarray = field(repr=False)
    distance: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.inside.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.inside.shape

    @property
    def ndof(self) -> int:
        return int(self.inside.sum())

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.h * np.asarray(self.shape)

    @property
    def inradius(self) -> float:
        """Discrete inradius d*_h (max of the boundary-distance field)."""
        return float(self.distance.max())

    def axes(self) -> list[np.ndarray]:
        return [self.lower[d] + (np.arange(n) + 0.5) * self.h for d, n in enumerate(self.shape)]

    def centers(self) -> np.ndarray:
        """Cell-center coordinates of the DOFs, shape ``(ndof, dim)``."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g[self.inside] for g in grids], axis=1)

    def to_grid(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Scatter a DOF vector onto the full grid."""
        out = np.full(self.shape, fill, dtype=np.asarray(values).dtype)
        out[self.inside] = values
        return out

    def from_grid(self, array: np.ndarray) -> np.ndarray:
        return np.asarray(array)[self.inside]

    def dof_mask(self, grid_mask: np.ndarray) -> np.ndarray:
        """Convert a grid-shaped boolean mask to a DOF mask.

        Raises if the mask selects cells outside the domain.
        """
        grid_mask = np.asarray(grid_mask, dtype=bool)
        if grid_mask.shape != self.shape:
            raise ValueError(f"mask shape {grid_mask.shape} != grid shape {self.shape}")
        if np.any(grid_mask & ~self.inside):
            raise ValueError("favorable set contains masked-out cells")
        return grid_mask[self.inside]

    @classmethod
    def from_predicate(
        cls,
        predicate: Predicate,
        lower: Sequence[float],
        h: float,
        shape: Sequence[int],
    ) -> "GridDomain":
        """Build a grid by evaluating ``predicate(*coords)`` at cell centers."""
        lower = np.asarray(lower, dtype=float)
        shape = tuple(int(n) for n in shape)
        if h <= 0:
            raise ValueError("grid spacing must be positive")
        if len(shape) != len(lower):
            raise ValueError("lower corner and shape disagree on dimension")
        axes = [lower[d] + (np.arange(n) + 0.5) * h for d, n in enumerate(shape)]
        coords = np.meshgrid(*axes, indexing="ij")
        inside = np.asarray(predicate(*coords), dtype=bool)
        if inside.shape != shape:
            raise ValueError("predicate returned an array of the wrong shape")
        inside.setflags(write=False)
        index = np.full(shape, -1, dtype=np.int64)
        index[inside] = np.arange(int(inside.sum()))
        index.setflags(write=False)
        distance = boundary_distance(inside, h)
        distance.setflags(write=False)
        return cls(h=float(h), lower=lower, inside=inside, index=index, distance=distance)

    @classmethod
    def box(cls, predicate: Predicate, lower: Sequence[float], upper: Sequence[float], n: int) -> "GridDomain":
        """Grid covering ``[lower, upper]`` with ``n`` cells along the longest side."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        h = float((upper - lower).max()) / n
        shape = np.maximum(np.round((upper - lower) / h).astype(int), 1)
        center = 0.5 * (lower + upper)
        lower = center - 0.5 * h * shape
        return cls.from_predicate(predicate, lower, h, shape)


def boundary_distance(inside: np.ndarray, h: float) -> np.ndarray:
    """Distance from interior cell centers to the mask boundary.

    Euclidean distance to the nearest excluded cell center, minus half a cell
    so that cells touching the boundary get ``d = h/2 - h/2 = 0`` up to O(h).
    Zero outside the mask.
    """
    padded = np.pad(inside, 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded)
    edt = edt[tuple(slice(1, -1) for _ in range(inside.ndim))]
    return np.where(inside, np.maximum(edt * h - 0.5 * h, 0.0), 0.0)


def ball_domain(radius: float, n: int, dim: int = 2, center: Sequence[float] | None = None) -> GridDomain:
    """Dirichlet ball of given radius on an ``n^dim`` grid spanning its bounding box."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    h = 2.0 * radius / n

    def inside(*x):
        return sum((xi - ci) ** 2 for xi, ci in zip(x, c)) < radius**2

    return GridDomain.from_predicate(inside, c - radius, h, (n,) * dim)
