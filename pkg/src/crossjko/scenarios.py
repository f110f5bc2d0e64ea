"""Closed-form oracles and initial data used by tests, benchmarks and the CLI."""

from __future__ import annotations

import numpy as np

from .grid import Density, Grid1D, SpeciesPair, density_from_function, normalize

# unit-mass Barenblatt profile of d_t rho = (rho**2)_xx in one dimension:
# rho = t**(-1/3) * (C - x**2 t**(-2/3) / 12)_+
BARENBLATT_C = (3.0 / (4.0 * np.sqrt(12.0))) ** (2.0 / 3.0)


def barenblatt_radius(t: float) -> float:
    return float(np.sqrt(12.0 * BARENBLATT_C) * t ** (1.0 / 3.0))


def barenblatt(x, t: float, center: float = 0.0) -> np.ndarray:
    """Pointwise value of the unit-mass profile at time ``t``."""
    y = np.asarray(x, dtype=float) - center
    return t ** (-1.0 / 3.0) * np.maximum(BARENBLATT_C - y * y * t ** (-2.0 / 3.0) / 12.0, 0.0)


def barenblatt_cells(grid: Grid1D, t: float, center: float = 0.0) -> np.ndarray:
    """Exact cell averages of the profile (no quadrature error)."""
    R = barenblatt_radius(t)
    a = np.clip(grid.faces[:-1] - center, -R, R)
    b = np.clip(grid.faces[1:] - center, -R, R)

    def prim(y):
        return t ** (-1.0 / 3.0) * (BARENBLATT_C * y - y**3 * t ** (-2.0 / 3.0) / 36.0)

    return (prim(b) - prim(a)) / grid.h


def barenblatt_density(grid: Grid1D, t: float, center: float = 0.0) -> Density:
    return normalize(np.maximum(barenblatt_cells(grid, t, center), 0.0), grid)


def barenblatt_pair(grid: Grid1D, t: float, centers=(0.0, 0.0)) -> SpeciesPair:
    return SpeciesPair(barenblatt_density(grid, t, centers[0]), barenblatt_density(grid, t, centers[1]))


def l1_distance(a: Density, b) -> float:
    vb = b.values if isinstance(b, Density) else np.asarray(b, dtype=float)
    return float(a.grid.h * np.sum(np.abs(a.values - vb)))


def gaussian_density(grid: Grid1D, center: float, width: float) -> Density:
    return density_from_function(lambda x: np.exp(-0.5 * ((x - center) / width) ** 2), grid)


def bump_density(grid: Grid1D, center: float, radius: float) -> Density:
    """Compactly supported smooth bump ``exp(-1 / (1 - r**2))``."""

    def f(x):
        r = (x - center) / radius
        out = np.zeros_like(r)
        inside = np.abs(r) < 1
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out

    return density_from_function(f, grid)


def uniform_density(grid: Grid1D, a: float, b: float) -> Density:
    """Normalized indicator of ``[a, b]`` with exact partial-cell weights."""
    lo = np.clip(grid.faces[:-1], a, b)
    hi = np.clip(grid.faces[1:], a, b)
    return normalize(hi - lo, grid)


def coupled_initial(grid: Grid1D) -> SpeciesPair:
    """Two offset, compactly supported bumps of unequal width."""
    return SpeciesPair(bump_density(grid, -0.4, 0.9), bump_density(grid, 0.5, 1.1))


def random_pair(grid: Grid1D, rng: np.random.Generator, support: float = 0.6) -> SpeciesPair:
    """Two random smooth positive densities well inside the grid."""
    L = grid.length
    c0 = grid.x_min + 0.5 * L
    out = []
    for _ in range(2):
        k = int(rng.integers(1, 4))
        cs = c0 + rng.uniform(-0.15, 0.15, k) * L
        ws = rng.uniform(0.04, 0.1, k) * L
        amps = rng.uniform(0.5, 1.5, k)

        def f(x, cs=cs, ws=ws, amps=amps):
            v = sum(a * np.exp(-0.5 * ((x - c) / w) ** 2) for a, c, w in zip(amps, cs, ws))
            r = (x - c0) / (0.5 * support * L)
            return v * np.clip(1.0 - r**2, 0.0, None) ** 2

        out.append(density_from_function(f, grid))
    return SpeciesPair(*out)
