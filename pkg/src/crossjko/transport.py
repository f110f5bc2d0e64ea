"""Quadratic Wasserstein distance between grid densities in one dimension.

In 1-D the monotone rearrangement is the optimal coupling, so everything
reduces to quantile functions.  For a density that is constant on each cell
the CDF is piecewise linear through the face values and the quantile
function is piecewise linear in the mass variable; ``w2`` integrates the
squared quantile difference exactly on the merged breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSupport, GridMismatch
from .grid import Density, SpeciesPair


@dataclass(frozen=True, eq=False)
class QuantileVector:
    """Quantile positions at the mass levels ``s_k = (k + 1/2) / n_q``."""

    values: np.ndarray

    @property
    def n_q(self) -> int:
        return int(self.values.shape[0])

    @property
    def levels(self) -> np.ndarray:
        return (np.arange(self.n_q) + 0.5) / self.n_q


def _check_same_grid(mu: Density, nu: Density):
    if mu.grid != nu.grid:
        raise GridMismatch("densities live on different grids")


def quantile_at(rho: Density, s) -> np.ndarray:
    """Generalized inverse of the piecewise-linear CDF of ``rho`` at levels ``s``.

    Levels at or below 0 (at or above 1) map to the left (right) end of the
    support.
    """
    F = rho.cdf_faces()
    f = rho.grid.faces
    s = np.asarray(s, dtype=float)
    n = rho.grid.n_cells
    j = np.searchsorted(F, s, side="right") - 1
    j = np.clip(j, 0, n - 1)
    dF = F[j + 1] - F[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = f[j] + (s - F[j]) / dF * rho.grid.h
    # s >= 1: first face carrying the full mass
    top = s >= 1.0
    if np.any(top):
        q = np.where(top, f[np.searchsorted(F, 1.0, side="left")], q)
    low = s <= 0.0
    if np.any(low):
        q = np.where(low, f[np.searchsorted(F, 0.0, side="right") - 1], q)
    return q


def quantile(rho: Density, n_q: int | None = None) -> QuantileVector:
    n = rho.grid.n_cells
    if n_q is None:
        n_q = 4 * n
    if n_q < n:
        raise ValueError(f"n_q must be at least n_cells={n}, got {n_q}")
    s = (np.arange(n_q) + 0.5) / n_q
    return QuantileVector(quantile_at(rho, s))


def w2_cdf(Fa, Fb, faces, grad: bool = False):
    """Exact ``W_2**2`` between two cell-constant densities given by their face CDFs.

    Both quantile functions are linear between consecutive merged levels, so
    the integral of the squared difference is summed in closed form.  With
    ``grad=True`` also returns the derivative with respect to the interior
    entries of ``Fb`` (the end entries are fixed at 0 and 1 and get 0).
    """
    # rounding can leave a deposited CDF a few ulps out of order
    Fa = np.clip(np.maximum.accumulate(np.asarray(Fa, dtype=float)), 0.0, 1.0)
    Fb = np.clip(np.maximum.accumulate(np.asarray(Fb, dtype=float)), 0.0, 1.0)
    f = np.asarray(faces, dtype=float)
    n = f.shape[0] - 1
    h = f[1] - f[0]
    br = np.union1d(Fa, Fb)
    br = br[(br >= 0.0) & (br <= 1.0)]
    lo, hi = br[:-1], br[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    # locate each piece by its left end: the next CDF value above lo is at
    # least hi, so the piece never straddles a flat cell (a midpoint can
    # round onto hi when lo and hi are adjacent floats)
    ja = np.clip(np.searchsorted(Fa, lo, side="right") - 1, 0, n - 1)
    jb = np.clip(np.searchsorted(Fb, lo, side="right") - 1, 0, n - 1)
    tiny = np.finfo(float).tiny
    La = np.maximum(Fa[ja + 1] - Fa[ja], tiny)
    Lb = np.maximum(Fb[jb + 1] - Fb[jb], tiny)
    ub_lo = (lo - Fb[jb]) / Lb
    ub_hi = (hi - Fb[jb]) / Lb
    d_lo = f[jb] + h * ub_lo - (f[ja] + h * (lo - Fa[ja]) / La)
    d_hi = f[jb] + h * ub_hi - (f[ja] + h * (hi - Fa[ja]) / La)
    ds = hi - lo
    w = float(np.sum(ds * (d_lo * d_lo + d_lo * d_hi + d_hi * d_hi)) / 3.0)
    if not grad:
        return w
    # moving Fb[k] stretches the two adjacent linear pieces of the quantile;
    # the sensitivities are the hat weights (Q_b - f_j)/Lb and (f_{j+1} - Q_b)/Lb
    # ds / Lb <= 1 keeps cells of vanishing mass from overflowing
    wt = h * (ds / Lb) / 6.0
    vl_lo, vl_hi = 1.0 - ub_lo, 1.0 - ub_hi
    i_r = wt * (2 * d_lo * ub_lo + d_lo * ub_hi + d_hi * ub_lo + 2 * d_hi * ub_hi)
    i_l = wt * (2 * d_lo * vl_lo + d_lo * vl_hi + d_hi * vl_lo + 2 * d_hi * vl_hi)
    g = -2.0 * (np.bincount(jb + 1, weights=i_r, minlength=n + 1) + np.bincount(jb, weights=i_l, minlength=n + 1))
    g[0] = 0.0
    g[-1] = 0.0
    return w, g


def w2_squared(mu: Density, nu: Density, n_q: int | None = None) -> float:
    """``W_2**2(mu, nu)``.

    With ``n_q=None`` the quantile integral is evaluated exactly; otherwise
    by the midpoint rule on ``n_q`` uniform mass levels.
    """
    _check_same_grid(mu, nu)
    if mu == nu:
        return 0.0
    if n_q is not None:
        d = quantile(mu, n_q).values - quantile(nu, n_q).values
        return float(np.mean(d * d))
    return w2_cdf(mu.cdf_faces(), nu.cdf_faces(), mu.grid.faces)


def w2(mu: Density, nu: Density, n_q: int | None = None) -> float:
    return float(np.sqrt(w2_squared(mu, nu, n_q)))


def product_w2_sq(a: SpeciesPair, b: SpeciesPair, n_q: int | None = None) -> float:
    """Squared product distance: sum of the two component ``W_2**2``."""
    return w2_squared(a.rho1, b.rho1, n_q) + w2_squared(a.rho2, b.rho2, n_q)


def product_w2(a: SpeciesPair, b: SpeciesPair, n_q: int | None = None) -> float:
    return float(np.sqrt(product_w2_sq(a, b, n_q)))


def _has_interior_vacuum(rho: Density) -> bool:
    pos = np.flatnonzero(rho.values > 0)
    if pos.size == 0:
        return False
    return bool(np.any(rho.values[pos[0] : pos[-1] + 1] == 0))


def optimal_map(mu: Density, nu: Density) -> np.ndarray:
    """Monotone rearrangement ``F_nu^{-1} o F_mu`` sampled at the cell centers."""
    _check_same_grid(mu, nu)
    if _has_interior_vacuum(mu):
        raise DegenerateSupport("source density vanishes inside its support; the map is not unique there")
    F = mu.cdf_faces()
    Fc = 0.5 * (F[:-1] + F[1:])
    return quantile_at(nu, Fc)


def transport_cost(mu: Density, T) -> float:
    """Midpoint-rule cost ``h * sum(|x_j - T(x_j)|**2 * mu_j)``."""
    g = mu.grid
    d = g.centers - np.asarray(T, dtype=float)
    return float(g.h * np.sum(d * d * mu.values))
