"""Explicit finite-volume solver for the expanded two-species system.

Species ``i`` moves with flux ``-rho_i d_x(A_rho_i) + rho_i v_i`` where
``v_i = -d_x(H_i * rho_i + K_i * rho_j)``.  The diffusion part is centered
(arithmetic face average of the density times the difference of
``A_rho_i``); the nonlocal drift is upwinded, optionally with a minmod
reconstruction.  Time stepping is the two-stage strong-stability-preserving
Runge-Kutta method, which keeps each stage a convex combination of
forward-Euler steps.  This solver shares no code with the variational
scheme beyond the model evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NegativityClipExceeded, StabilityViolation
from .grid import SpeciesPair, first_moment, normalize
from .jko import JkoConfig, Trajectory, n_steps_for
from .model import ModelSpec, convolve

CLIP_TOL = 1e-8


@dataclass(frozen=True)
class FvConfig:
    """``dt_fv=None`` uses ``safety`` times the stability cap at every step."""

    dt_fv: float | None = None
    limiter: bool = False
    safety: float = 0.9
    strict: bool = False

    def __post_init__(self):
        if self.dt_fv is not None and not self.dt_fv > 0:
            raise ValueError("dt_fv must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _drift_flux(rho, vel, limiter):
    if not limiter:
        return kernels.upwind_flux(rho, vel)
    slope = np.zeros_like(rho)
    slope[1:-1] = _minmod(rho[1:-1] - rho[:-2], rho[2:] - rho[1:-1])
    left = rho[:-1] + 0.5 * slope[:-1]
    right = rho[1:] - 0.5 * slope[1:]
    return np.where(vel > 0, left, right) * vel


class _Rhs:
    def __init__(self, grid, model: ModelSpec, limiter: bool):
        self.grid = grid
        self.model = model
        self.limiter = limiter
        h = grid.h
        off = grid.offsets + 0.5 * h
        # kernel gradients at face-minus-center offsets, shared by all steps
        self.kg = [None if k.is_zero else k.grad(off) for k in (model.H1, model.H2, model.K1, model.K2)]

    def _face_conv(self, which, r):
        kv = self.kg[which]
        if kv is None:
            return np.zeros(r.shape[0] - 1)
        return self.grid.h * kernels.toeplitz_conv(kv, r)[:-1]

    def fluxes(self, r1, r2):
        """Interior-face fluxes and the interaction velocities of both species."""
        h = self.grid.h
        d = self.model.diffusion
        out = []
        vels = []
        if d.is_zero:
            a = (np.zeros_like(r1), np.zeros_like(r2))
        else:
            a = d.A_grad(r1, r2)
        for i, (r, other) in enumerate(((r1, r2), (r2, r1))):
            v = -(self._face_conv(i, r) + self._face_conv(2 + i, other))
            avg = 0.5 * (r[:-1] + r[1:])
            fd = -avg * np.diff(a[i]) / h
            out.append(fd + _drift_flux(r, v, self.limiter))
            vels.append(v)
        return out, vels

    def stable_dt(self, r1, r2, vels):
        d = self.model.diffusion
        h = self.grid.h
        cap = np.inf
        if not d.is_zero:
            a11, a12, a22 = d.A_hess(r1, r2)
            with np.errstate(invalid="ignore"):
                g1 = r1 * (np.abs(a11) + np.abs(a12))
                g2 = r2 * (np.abs(a22) + np.abs(a12))
            dmax = float(np.nanmax(np.concatenate([g1, g2])))
            if not np.isfinite(dmax):
                raise StabilityViolation("diffusivity is not finite")
            if dmax > 0:
                cap = min(cap, h * h / (2.0 * dmax))
        vmax = max(float(np.abs(v).max()) for v in vels) if vels[0].size else 0.0
        if vmax > 0:
            cap = min(cap, h / (2.0 * vmax))
        return cap


@dataclass
class FvStats:
    steps: int = 0
    clipped_mass: float = 0.0
    moment_residual: float = 0.0
    dt_min: float = np.inf


def _euler(r1, r2, rhs: _Rhs, dt):
    (f1, f2), vels = rhs.fluxes(r1, r2)
    h = rhs.grid.h
    n1 = r1.copy()
    n2 = r2.copy()
    n1[:-1] -= dt / h * f1
    n1[1:] += dt / h * f1
    n2[:-1] -= dt / h * f2
    n2[1:] += dt / h * f2
    return n1, n2, (f1, f2), vels


def fv_run(initial: SpeciesPair, horizon_T: float, model: ModelSpec, fv_config: FvConfig = FvConfig(), out_dt: float | None = None):
    """Integrate to ``horizon_T``; snapshots every ``out_dt`` (default: only the end).

    Returns ``(trajectory, stats)``.
    """
    g = initial.grid
    h = g.h
    x = g.centers
    if out_dt is None:
        out_dt = horizon_T
    n_out = n_steps_for(horizon_T, out_dt)
    rhs = _Rhs(g, model, fv_config.limiter)
    r1 = np.array(initial.rho1.values)
    r2 = np.array(initial.rho2.values)
    snaps = [initial]
    stats = FvStats()
    t = 0.0
    for k in range(1, n_out + 1):
        t_target = k * out_dt
        while t < t_target - 1e-14 * max(1.0, t_target):
            (f1, f2), vels = rhs.fluxes(r1, r2)
            cap = fv_config.safety * rhs.stable_dt(r1, r2, vels)
            dt = cap if fv_config.dt_fv is None else fv_config.dt_fv
            if fv_config.dt_fv is not None and fv_config.dt_fv > cap / fv_config.safety:
                if fv_config.strict:
                    raise StabilityViolation(f"dt_fv={fv_config.dt_fv:.3e} exceeds the stability cap {cap / fv_config.safety:.3e}")
                dt = cap
            dt = min(dt, t_target - t)
            if not dt > 1e-300:
                raise StabilityViolation("time step collapsed")
            m_before = h * np.dot(x, r1)
            # stage 1 reuses the fluxes already computed for the cap
            a1 = r1.copy()
            a2 = r2.copy()
            a1[:-1] -= dt / h * f1
            a1[1:] += dt / h * f1
            a2[:-1] -= dt / h * f2
            a2[1:] += dt / h * f2
            b1, b2, (g1, _), _ = _euler(a1, a2, rhs, dt)
            n1 = 0.5 * (r1 + b1)
            n2 = 0.5 * (r2 + b2)
            # discrete summation by parts: first moment moves by dt * h * sum(flux)
            pred = dt * h * 0.5 * (f1.sum() + g1.sum())
            stats.moment_residual = max(stats.moment_residual, abs(h * np.dot(x, n1) - m_before - pred))
            for arr in (n1, n2):
                if not np.all(np.isfinite(arr)):
                    raise StabilityViolation(f"non-finite density at t={t:.6g}")
                neg = arr < 0
                if np.any(neg):
                    lost = float(-h * arr[neg].sum())
                    stats.clipped_mass += lost
                    arr[neg] = 0.0
            if stats.clipped_mass > CLIP_TOL:
                raise NegativityClipExceeded(f"clipped mass {stats.clipped_mass:.3e} exceeds {CLIP_TOL}")
            r1, r2 = n1, n2
            t += dt
            stats.steps += 1
            stats.dt_min = min(stats.dt_min, dt)
        snaps.append(SpeciesPair(normalize(r1, g), normalize(r2, g)))
        t = t_target
    traj = Trajectory(g, model, JkoConfig(tau=out_dt, check_boundary=False), tuple(snaps), (), label="fv")
    return traj, stats


def center_of_mass_path(traj: Trajectory) -> np.ndarray:
    """``(n_snapshots, 2)`` array of the species' first moments."""
    return np.array([[first_moment(p.rho1), first_moment(p.rho2)] for p in traj.snapshots])
