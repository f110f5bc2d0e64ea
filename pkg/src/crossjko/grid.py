"""Probability densities on a uniform 1-D grid.

Densities are cell averages (mass per unit length) on the cells of a
:class:`Grid1D`; every :class:`Density` has unit mass.  All objects are
immutable snapshots and all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import GridMismatch, ImageEscapesGrid, NegativeEntry, NonMonotoneMap, ZeroMass

MASS_TOL = 1e-12
BOUNDARY_CELLS = 5
BOUNDARY_MASS_TOL = 1e-6


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh of ``n_cells`` cells on ``[x_min, x_max]``."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValueError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        x = self.x_min + (np.arange(self.n_cells) + 0.5) * self.h
        x.flags.writeable = False
        return x

    @cached_property
    def faces(self) -> np.ndarray:
        f = self.x_min + np.arange(self.n_cells + 1) * self.h
        f[-1] = self.x_max
        f.flags.writeable = False
        return f

    @cached_property
    def offsets(self) -> np.ndarray:
        """Center differences ``x_j - x_k`` indexed by ``j - k + n - 1``."""
        o = np.arange(-(self.n_cells - 1), self.n_cells) * self.h
        o.flags.writeable = False
        return o

    def refine(self, factor: int = 2) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.n_cells * factor)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative unit-mass cell averages on ``grid``."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        if np.any(v < 0):
            raise NegativeEntry(f"negative density value {v.min():.3e}")
        mass = self.grid.h * v.sum()
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"density mass {mass!r} differs from 1 by more than {MASS_TOL}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return float(self.grid.h * self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, Density):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))

    def cdf_faces(self) -> np.ndarray:
        """Cumulative mass at the cell faces, exactly 0 and 1 at the ends."""
        c = np.concatenate(([0.0], np.cumsum(self.values * self.grid.h)))
        c /= c[-1]
        return c


@dataclass(frozen=True, eq=False)
class SpeciesPair:
    rho1: Density
    rho2: Density

    def __post_init__(self):
        if self.rho1.grid != self.rho2.grid:
            raise GridMismatch("both species must live on the same grid")

    @property
    def grid(self) -> Grid1D:
        return self.rho1.grid

    def __iter__(self):
        yield self.rho1
        yield self.rho2

    def __getitem__(self, i: int) -> Density:
        return (self.rho1, self.rho2)[i]

    def __eq__(self, other):
        if not isinstance(other, SpeciesPair):
            return NotImplemented
        return self.rho1 == other.rho1 and self.rho2 == other.rho2

    def __hash__(self):
        return hash((self.rho1, self.rho2))


def normalize(raw, grid: Grid1D) -> Density:
    """Rescale a nonnegative vector to a unit-mass density on ``grid``."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (grid.n_cells,):
        raise ValueError(f"expected {grid.n_cells} values, got shape {raw.shape}")
    if np.any(raw < 0):
        raise NegativeEntry(f"entry {int(np.argmin(raw))} is negative ({raw.min():.3e})")
    total = raw.sum()
    if total == 0:
        raise ZeroMass("cannot normalize a vector with zero mass")
    values = raw / (grid.h * total)
    # one correction pass absorbs the rounding of the division
    values = values / (grid.h * values.sum())
    return Density(grid, values)


def density_from_function(f, grid: Grid1D, quad_points: int = 8) -> Density:
    """Normalized cell averages of ``f`` using Gauss-Legendre quadrature per cell."""
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    left = grid.faces[:-1, None]
    xq = left + 0.5 * grid.h * (nodes[None, :] + 1.0)
    vals = np.asarray(f(xq), dtype=float) @ (0.5 * weights)
    return normalize(np.clip(vals, 0.0, None), grid)


def second_moment(rho: Density) -> float:
    """Midpoint-rule second moment ``h * sum(x_j**2 * rho_j)``."""
    g = rho.grid
    return float(g.h * np.sum(g.centers**2 * rho.values))


def first_moment(rho: Density) -> float:
    g = rho.grid
    return float(g.h * np.sum(g.centers * rho.values))


def deposit(nodes, levels, grid: Grid1D) -> np.ndarray:
    """Cell averages of the measure whose CDF is piecewise linear through ``(nodes, levels)``."""
    cdf, _ = kernels.cdf_at(nodes, levels, grid.faces)
    return np.diff(cdf) / grid.h


def face_values(samples, grid: Grid1D) -> np.ndarray:
    """Extend values sampled at cell centers to the faces (linear inter/extrapolation)."""
    t = np.asarray(samples, dtype=float)
    out = np.empty(grid.n_cells + 1)
    out[1:-1] = 0.5 * (t[:-1] + t[1:])
    out[0] = 1.5 * t[0] - 0.5 * t[1]
    out[-1] = 1.5 * t[-1] - 0.5 * t[-2]
    return out


def pushforward(rho: Density, T) -> Density:
    """Image measure of ``rho`` under a nondecreasing map sampled at cell centers.

    The map is extended piecewise linearly; each cell's mass is spread
    uniformly over the image of the cell and the result is re-averaged onto
    the grid through its CDF, so mass is preserved exactly.
    """
    g = rho.grid
    T = np.asarray(T, dtype=float)
    if T.shape != (g.n_cells,):
        raise ValueError(f"map must be sampled at the {g.n_cells} cell centers")
    if np.any(np.diff(T) < 0):
        raise NonMonotoneMap("the map decreases between adjacent cell centers")
    tol = 1e-12 * max(1.0, abs(g.x_min), abs(g.x_max))
    if T[0] < g.x_min - tol or T[-1] > g.x_max + tol:
        raise ImageEscapesGrid(f"map image [{T[0]}, {T[-1]}] leaves [{g.x_min}, {g.x_max}]")
    if np.array_equal(T, g.centers):
        return rho
    nodes = np.clip(face_values(T, g), g.x_min, g.x_max)
    raw = deposit(nodes, rho.cdf_faces(), g)
    return normalize(np.clip(raw, 0.0, None), g)


def entropy_density(rho: Density) -> float:
    v = rho.values
    pos = v > 0
    return float(rho.grid.h * np.sum(v[pos] * np.log(v[pos])))


def entropy(pair: SpeciesPair) -> float:
    """Boltzmann entropy of both species, with ``0 log 0 = 0``."""
    return entropy_density(pair.rho1) + entropy_density(pair.rho2)


def lp_norm_power(rho: Density, p: float) -> float:
    """``h * sum(rho**p)``, the discrete ``||rho||_p**p``."""
    return float(rho.grid.h * np.sum(rho.values**p))


def boundary_mass(rho: Density, cells: int = BOUNDARY_CELLS) -> float:
    """Mass within ``cells`` cells of either end of the grid."""
    v = rho.values
    return float(rho.grid.h * (v[:cells].sum() + v[-cells:].sum()))
