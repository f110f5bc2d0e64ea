"""Semi-implicit minimizing-movement scheme for the two-species system.

One step minimizes ``W(rho^n, rho) / (2 tau) + F[rho | rho^n]`` where the
cross-interaction terms are frozen at ``rho^n``.  Each species is moved by
a monotone map: the unknowns are the images ``Y`` of the cell faces of the
previous density, each cell's mass is spread uniformly over its image
interval, and the new grid density is the cell average of that measure.
The transport term is the exact squared distance between the two grid
densities, so the accepted iterate can never have a larger step objective
than the starting point ``Y = faces`` (the previous state).

The minimization is a preconditioned projected gradient method: the
gradient is divided by the mass carried by each node, projected back on
the nondecreasing cone by weighted pool-adjacent-violators, and the step
length comes from a Barzilai-Borwein guess followed by Armijo backtracking.
Species are updated one after the other until a full sweep stops making
progress.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BoundaryEscape, InnerSolverStalled, OutOfRange
from .grid import BOUNDARY_MASS_TOL, Density, Grid1D, SpeciesPair, boundary_mass, normalize
from .model import EnergyBreakdown, ModelSpec, PowerTerm, convolve, relative_energy
from .transport import w2_cdf, w2_squared

ARMIJO = 1e-4
MAX_BACKTRACKS = 40
STALL_WINDOW = 5
FACE_SNAP = 1e-9  # in units of h


@dataclass(frozen=True)
class JkoConfig:
    """Time step and inner-solver settings.

    ``n_q`` selects the quadrature used for the reported step distances
    (``None`` means exact); the minimization itself always uses the exact
    distance.
    """

    tau: float = 1e-3
    inner_tol: float = 1e-9
    max_inner_iters: int = 400
    n_q: int | None = None
    step_shrink: float = 0.5
    step_grow: float = 2.0
    max_sweeps: int = 20
    check_boundary: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.inner_tol > 0:
            raise ValueError(f"inner_tol must be positive, got {self.inner_tol}")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be at least 1")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not self.step_grow >= 1:
            raise ValueError("step_grow must be at least 1")


@dataclass(frozen=True)
class StepRecord:
    index: int
    w2_sq: float
    w2_sq_species: tuple[float, float]
    energy_prev: EnergyBreakdown
    energy_new: EnergyBreakdown
    inner_iters: int
    sweeps: int
    converged: bool
    stationarity: float

    @property
    def objective_prev(self) -> float:
        return self.energy_prev.total

    def scheme_slack(self, tau: float) -> float:
        """``W/(2 tau) - (F[prev|prev] - F[new|prev])``; nonpositive when the step decreased the objective."""
        return self.w2_sq / (2.0 * tau) - (self.energy_prev.total - self.energy_new.total)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: Grid1D
    model: ModelSpec
    config: JkoConfig
    snapshots: tuple[SpeciesPair, ...]
    records: tuple[StepRecord, ...] = ()
    label: str = "jko"

    @property
    def tau(self) -> float:
        return self.config.tau

    @property
    def n_steps(self) -> int:
        return len(self.snapshots) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.snapshots)) * self.tau

    @property
    def final(self) -> SpeciesPair:
        return self.snapshots[-1]


def n_steps_for(horizon: float, tau: float) -> int:
    """``floor(T / tau)`` robust to the rounding of ``T / tau``."""
    return int(math.floor(horizon / tau + 1e-9))


class _Species:
    """Per-species state of one step: the reference density and the face images."""

    def __init__(self, rho: Density):
        g = rho.grid
        self.grid = g
        self.h = g.h
        self.faces = np.asarray(g.faces)
        self.levels = rho.cdf_faces()
        self.ref_values = rho.values
        masses = np.diff(self.levels)
        P = np.zeros(g.n_cells + 1)
        P[:-1] += 0.5 * masses
        P[1:] += 0.5 * masses
        self.P = P
        self.active = P > 0
        self.pav_w = P + 1e-12 * P.max()
        self.Y = self.faces.copy()
        self.G = self.levels.copy()
        self.values = np.array(rho.values)

    def deposit(self, Y):
        G, idx = kernels.cdf_at(Y, self.levels, self.faces)
        G[0] = 0.0
        G[-1] = 1.0
        return G, idx

    def project(self, Y):
        Z = kernels.pav(Y, self.pav_w)
        Z = np.clip(Z, self.faces[0], self.faces[-1])
        # a node resting a rounding distance from a face would have every
        # trial step cross the kink there; put it on the face, where the
        # two-sided derivative rule applies
        k = np.clip(np.rint((Z - self.faces[0]) / self.h).astype(np.int64), 0, self.faces.size - 1)
        near = np.abs(Z - self.faces[k]) <= FACE_SNAP * self.h
        return np.where(near, self.faces[k], Z)


class _StepProblem:
    def __init__(self, prev: SpeciesPair, model: ModelSpec, config: JkoConfig):
        self.model = model
        self.cfg = config
        self.tau = config.tau
        self.sp = [_Species(prev.rho1), _Species(prev.rho2)]
        # cross potentials against the frozen previous state
        self.cross = [convolve(model.K1, prev.rho2), convolve(model.K2, prev.rho1)]
        self.selfk = [model.H1, model.H2]
        self.h = prev.grid.h

    def _energy(self, i, r, other):
        d = self.model.diffusion
        h = self.h
        r1, r2 = (r, other) if i == 0 else (other, r)
        e = 0.0
        a_rho = None
        if not d.is_zero:
            e1, e2 = d.etas(r1, r2)
            e += h * float(np.sum(d.B(e1, e2)))
            a_rho = d.A_grad(r1, r2)[i]
        H = self.selfk[i]
        phi = np.zeros_like(r) if a_rho is None else np.array(a_rho, dtype=float)
        if not H.is_zero:
            hconv = h * kernels.toeplitz_conv(H.value(self.sp[i].grid.offsets), r)
            e += 0.5 * h * float(np.dot(hconv, r))
            phi += hconv
        c = self.cross[i]
        e += h * float(np.dot(c, r))
        phi += c
        return e, phi

    def objective(self, i, Y, other, grad=False):
        s = self.sp[i]
        G, idx = s.deposit(Y)
        r = np.maximum(np.diff(G), 0.0) / s.h
        if grad:
            w, dw = w2_cdf(s.levels, G, s.faces, grad=True)
        else:
            w = w2_cdf(s.levels, G, s.faces)
        e, phi = self._energy(i, r, other)
        J = w / (2.0 * self.tau) + e
        if not grad:
            return J, G, r
        dG = dw / (2.0 * self.tau)
        dG[1:-1] += phi[:-1] - phi[1:]
        dG[0] = 0.0
        dG[-1] = 0.0
        # nodes sitting exactly on a face are kinks of the deposit; the
        # right-continuous lookup gives the derivative for moving down, the
        # left one for moving up, and each node keeps a descent-admitting one
        g_dn = kernels.cdf_adjoint(Y, s.levels, s.faces, idx, dG)
        idx_l = np.searchsorted(Y, s.faces, side="left") - 1
        if np.array_equal(idx_l, idx):
            gY = g_dn
        else:
            g_up = kernels.cdf_adjoint(Y, s.levels, s.faces, idx_l.astype(np.int64), dG)
            up = (g_up < 0) & ((g_dn <= 0) | (-g_up >= g_dn))
            dn = (g_dn > 0) & ~up
            gY = np.where(up, g_up, np.where(dn, g_dn, 0.0))
        gY[~s.active] = 0.0
        return J, G, r, gY

    def solve_species(self, i, other, max_iters):
        """Projected gradient on species ``i``; returns (iterations, stationarity, ok)."""
        s = self.sp[i]
        cfg = self.cfg
        Y = s.Y
        J, G, r, g = self.objective(i, Y, other, grad=True)
        t = self.tau
        stat = math.inf
        it = 0
        prev_Y = prev_g = None
        recent = []
        while it < max_iters:
            direction = np.where(s.active, g / np.where(s.active, s.P, 1.0), 0.0)
            # stationarity: decrease predicted by a natural-length projected step
            Yn = s.project(Y - self.tau * direction)
            stat = float(np.dot(g, Y - Yn))
            if stat <= cfg.inner_tol:
                break
            # the objective has stopped moving: creeping along near-flat
            # directions of the deposit would not change the density
            if len(recent) == STALL_WINDOW and sum(recent) <= cfg.inner_tol:
                stat = min(stat, sum(recent))
                break
            if prev_Y is not None:
                sv = Y - prev_Y
                yv = g - prev_g
                sy = float(np.dot(sv, yv))
                if sy > 0:
                    t = float(np.dot(sv * s.P, sv)) / sy
                else:
                    t = t * cfg.step_grow
                t = min(max(t, 1e-12 * self.tau), 1e6 * self.tau)
            accepted = False
            for _ in range(MAX_BACKTRACKS):
                Yt = s.project(Y - t * direction)
                decr = float(np.dot(g, Yt - Y))
                if decr >= 0.0:
                    t *= cfg.step_shrink
                    continue
                Jt, Gt, rt = self.objective(i, Yt, other)
                if np.isfinite(Jt) and Jt <= J + ARMIJO * decr:
                    accepted = True
                    break
                t *= cfg.step_shrink
            it += 1
            if not accepted:
                if it == 1 and stat > cfg.inner_tol:
                    s.Y, s.G, s.values = Y, G, r
                    return it, stat, False
                break
            prev_Y, prev_g = Y, g
            Y = Yt
            J_old = J
            J, G, r, g = self.objective(i, Y, other, grad=True)
            recent = (recent + [J_old - J])[-STALL_WINDOW:]
        s.Y, s.G, s.values = Y, G, r
        return it, stat, True


def _check_boundary(pair: SpeciesPair, index: int | None, where: str):
    for k, rho in enumerate(pair, start=1):
        bm = boundary_mass(rho)
        if bm > BOUNDARY_MASS_TOL:
            raise BoundaryEscape(f"species {k} has mass {bm:.3e} near the boundary ({where})", step_index=index)


def jko_step(prev: SpeciesPair, model: ModelSpec, config: JkoConfig, index: int = 0) -> tuple[SpeciesPair, StepRecord]:
    """One minimizing-movement step from ``prev``."""
    if config.check_boundary:
        _check_boundary(prev, index, "before the step")
    energy_prev = relative_energy(prev, prev, model)
    if model.is_zero:
        rec = StepRecord(index, 0.0, (0.0, 0.0), energy_prev, energy_prev, 0, 0, True, 0.0)
        return prev, rec

    prob = _StepProblem(prev, model, config)
    total_iters = 0
    stat = 0.0
    converged = True
    sweeps = 0
    for sweeps in range(1, config.max_sweeps + 1):
        moved = 0
        worst = 0.0
        for i in (0, 1):
            other = prob.sp[1 - i].values
            it, st, ok = prob.solve_species(i, other, config.max_inner_iters)
            if not ok:
                raise InnerSolverStalled(
                    f"no decrease for species {i + 1} at the minimum step length (stationarity {st:.3e})",
                    step_index=index,
                )
            total_iters += it
            worst = max(worst, st)
            # a species that needed no iteration was already stationary
            # against the other's current state
            if it > 0:
                moved += 1
        stat = worst
        if moved == 0:
            break
        if model.diffusion.is_zero or _decoupled(model):
            # species interact only through frozen terms: one sweep is exact
            break
    converged = stat <= config.inner_tol
    new = SpeciesPair(
        normalize(prob.sp[0].values, prev.grid),
        normalize(prob.sp[1].values, prev.grid),
    )
    if config.check_boundary:
        _check_boundary(new, index, "after the step")
    energy_new = relative_energy(new, prev, model)
    w1 = w2_squared(prev.rho1, new.rho1, config.n_q)
    w2_ = w2_squared(prev.rho2, new.rho2, config.n_q)
    rec = StepRecord(index, w1 + w2_, (w1, w2_), energy_prev, energy_new, total_iters, sweeps, converged, stat)
    return new, rec


def _decoupled(model: ModelSpec) -> bool:
    """True when the diffusion has no mixed term, so the species never see each other inside a step."""
    return all(isinstance(t, PowerTerm) and (t.p == 0 or t.q == 0) for t in model.diffusion.terms)


def run_scheme(initial: SpeciesPair, horizon_T: float, model: ModelSpec, config: JkoConfig, progress=None) -> Trajectory:
    """March ``floor(T / tau)`` steps from ``initial``.

    Errors raised by a step carry its index and the partial trajectory in
    the ``partial`` attribute.
    """
    n = n_steps_for(horizon_T, config.tau)
    snaps = [initial]
    recs = []
    cur = initial
    for k in range(n):
        try:
            cur, rec = jko_step(cur, model, config, index=k)
        except (InnerSolverStalled, BoundaryEscape) as exc:
            exc.step_index = k
            exc.partial = Trajectory(initial.grid, model, config, tuple(snaps), tuple(recs))
            raise
        snaps.append(cur)
        recs.append(rec)
        if progress is not None:
            progress(k, rec)
    return Trajectory(initial.grid, model, config, tuple(snaps), tuple(recs))


def interpolate(traj: Trajectory, t: float) -> SpeciesPair:
    """Piecewise-constant interpolant: ``t`` in ``((n-1) tau, n tau]`` gives snapshot ``n``."""
    tau = traj.tau
    end = traj.n_steps * tau
    if t < 0 or t > end * (1 + 1e-12) + 1e-15:
        raise OutOfRange(f"t={t} outside [0, {end}]")
    if t == 0:
        return traj.snapshots[0]
    n = int(math.ceil(t / tau - 1e-9))
    return traj.snapshots[min(max(n, 0), traj.n_steps)]
