"""Numerical checks of the a-priori estimates along a computed trajectory.

Every check is a pure function of its inputs and returns a
:class:`DiagnosticEntry`.  Constants the theory only asserts to exist are
either taken from the audited model (coercivity, Laplacian and Lipschitz
bounds) or fitted on one sample and then asserted on a disjoint one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_banded

from .errors import HeatStepUnstable, ImageEscapesGrid, NonMonotonePerturbation, TooFewSteps, UnsupportedWindow
from .grid import Density, Grid1D, SpeciesPair, entropy, lp_norm_power, normalize, second_moment
from .jko import Trajectory, interpolate
from .model import ModelSpec, convolve, f_tilde, relative_energy
from .transport import product_w2, w2_squared

HOLDER_EXPONENT_RANGE = (0.45, 1.1)
HOLDER_MARGIN = 1.5
MIN_HOLDER_STEPS = 10
MOMENT_TOL = 1e-8
DISSIPATION_TOL = 1e-8
FLOW_REL_TOL = 1e-3
ENTROPY_TOL = 1e-12
DQ_RATIO = 1.8
HEAT_LAMBDA = 1e-5  # cap on s / h**2 for the finite-s heat quotient


@dataclass
class DiagnosticEntry:
    name: str
    passed: bool
    worst_slack: float = 0.0
    witness: object = None
    constants: dict = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_slack": _jsonable(self.worst_slack),
            "witness": _jsonable(self.witness),
            "constants": _jsonable(self.constants),
            "detail": self.detail,
        }


@dataclass
class DiagnosticsReport:
    subject: str
    entries: list[DiagnosticEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> DiagnosticEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self) -> list[DiagnosticEntry]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {"subject": self.subject, "passed": self.passed, "entries": [e.to_dict() for e in self.entries]}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


# ------------------------------------------------------------ test functions


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported function ``p(r) * exp(-1 / (1 - r**2))``, ``r = (x - center) / width``.

    ``kind="bump"`` uses ``p = 1``; ``kind="poly_bump"`` uses the polynomial
    with coefficients ``poly`` (lowest degree first) in ``r``.
    """

    __test__ = False  # keep pytest from collecting it

    center: float = 0.0
    width: float = 1.0
    kind: str = "bump"
    poly: tuple[float, ...] = (1.0, 1.0)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bump", "poly_bump"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError("width must be positive")

    def _parts(self, x):
        r = (np.asarray(x, dtype=float) - self.center) / self.width
        inside = np.abs(r) < 1
        ri = r[inside]
        u = 1.0 - ri * ri
        b = np.exp(-1.0 / u)
        # derivatives of exp(g), g = -1/u, with respect to r
        g1 = -2.0 * ri / (u * u)
        g2 = -2.0 / (u * u) - 8.0 * ri * ri / u**3
        b1 = b * g1
        b2 = b * (g1 * g1 + g2)
        p = Polynomial(self.poly if self.kind == "poly_bump" else (1.0,))
        p0, p1, p2 = p(ri), p.deriv(1)(ri), p.deriv(2)(ri)
        return r, inside, (p0 * b, p1 * b + p0 * b1, p2 * b + 2 * p1 * b1 + p0 * b2)

    def _out(self, x, k):
        r, inside, parts = self._parts(x)
        out = np.zeros_like(r)
        out[inside] = self.scale * parts[k] / self.width**k
        return out

    def value(self, x):
        return self._out(x, 0)

    def gradient(self, x):
        return self._out(x, 1)

    def laplacian(self, x):
        return self._out(x, 2)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.width, self.center + self.width

    def lipschitz(self, n: int = 4001) -> float:
        x = np.linspace(*self.support, n)
        return float(np.abs(self.gradient(x)).max())


# ------------------------------------------------------------------ Hölder


def _pair_sample(n_snap: int, n_pairs: int, rng: np.random.Generator) -> np.ndarray:
    i = rng.integers(0, n_snap, size=4 * n_pairs)
    j = rng.integers(0, n_snap, size=4 * n_pairs)
    keep = i != j
    p = np.sort(np.column_stack([i[keep], j[keep]]), axis=1)
    p = np.unique(p, axis=0)
    return p[rng.permutation(len(p))[:n_pairs]]


def check_holder(traj: Trajectory, n_pairs: int = 100, seed: int = 0, c: float | None = None) -> DiagnosticEntry:
    """Half-Hölder modulus of the piecewise-constant interpolant.

    The exponent is the least-squares slope of ``log W`` against
    ``log |t - s|``.  Unless ``c`` is given, the constant is the largest
    ratio ``W / (sqrt(1 + T) (sqrt|t-s| + sqrt(tau)))`` on a calibration
    sample times ``HOLDER_MARGIN``; the bound is then asserted on a fresh
    sample and on every adjacent pair.
    """
    N = traj.n_steps
    if N < MIN_HOLDER_STEPS:
        raise TooFewSteps(f"need at least {MIN_HOLDER_STEPS} steps, got {N}")
    tau = traj.tau
    T = N * tau
    rng = np.random.default_rng(seed)
    n_snap = N + 1
    total = n_snap * N // 2
    if total <= 2 * n_pairs:
        allp = np.array([(a, b) for a in range(n_snap) for b in range(a + 1, n_snap)])
        allp = allp[rng.permutation(len(allp))]
        calib, fresh = allp[::2], allp[1::2]
    else:
        both = _pair_sample(n_snap, 2 * n_pairs, rng)
        calib, fresh = both[:n_pairs], both[n_pairs:]
    adjacent = np.column_stack([np.arange(N), np.arange(1, N + 1)])

    cache: dict[tuple[int, int], float] = {}

    def dist(a, b):
        key = (int(a), int(b))
        if key not in cache:
            cache[key] = product_w2(traj.snapshots[key[0]], traj.snapshots[key[1]])
        return cache[key]

    def scale(a, b):
        return np.sqrt(1.0 + T) * (np.sqrt(abs(b - a) * tau) + np.sqrt(tau))

    d_cal = np.array([dist(a, b) for a, b in calib])
    gap_cal = np.array([(b - a) * tau for a, b in calib])
    pos = d_cal > 0
    if pos.sum() < 2:
        return DiagnosticEntry("holder", True, 0.0, None, {"exponent": None, "c": 0.0}, "distances vanish: trivially continuous")
    A = np.column_stack([np.ones(pos.sum()), np.log(gap_cal[pos])])
    coef, *_ = np.linalg.lstsq(A, np.log(d_cal[pos]), rcond=None)
    exponent = float(coef[1])
    if c is None:
        c_fit = float(np.max(d_cal / np.array([scale(a, b) for a, b in calib])))
        c_used = HOLDER_MARGIN * c_fit
    else:
        c_fit = None
        c_used = float(c)

    worst, witness = -np.inf, None
    for a, b in np.concatenate([fresh, adjacent]):
        s = dist(a, b) - c_used * scale(a, b)
        if s > worst:
            worst, witness = s, {"s": float(a * tau), "t": float(b * tau)}
    lo, hi = HOLDER_EXPONENT_RANGE
    passed = exponent <= hi and worst <= 0.0
    return DiagnosticEntry(
        "holder",
        bool(passed),
        float(worst),
        witness,
        {"exponent": exponent, "exponent_in_range": bool(lo <= exponent <= hi), "c": c_used, "c_calibrated": c_fit, "T": T},
        f"{len(calib)} calibration pairs, {len(fresh)} fresh pairs, {N} adjacent pairs",
    )


# ---------------------------------------------------------------- norm bounds


def _exd2_constant(model: ModelSpec) -> float:
    from .audit import audit_diffusion

    return float(audit_diffusion(model.diffusion).entry("exD2").value)


def _self_floor(model: ModelSpec, grid: Grid1D) -> float:
    """Lower bound ``0.5 * (inf H1 + inf H2)`` of the self energies of unit-mass densities."""
    off = grid.offsets
    return 0.5 * sum(min(0.0, float(H.value(off).min())) for H in (model.H1, model.H2) if not H.is_zero)


def lm_sum(pair: SpeciesPair, model: ModelSpec) -> float:
    """``||rho1||_m1**m1 + ||rho2||_m2**m2``."""
    d = model.diffusion
    return lp_norm_power(pair.rho1, d.m1) + lp_norm_power(pair.rho2, d.m2)


def check_norm_bounds(traj: Trajectory, model: ModelSpec, c_exd2: float | None = None) -> DiagnosticEntry:
    """``L^m`` bound from the lower control of ``A`` and the growth of the energy.

    The bound is ``(F_tilde[rho_0] + C T - inf self energy) / c_exd2`` with
    ``C = Lip(K1)**2 + Lip(K2)**2``; the self-energy floor is zero for
    nonnegative self kernels.
    """
    d = model.diffusion
    norms = np.array([lm_sum(p, model) for p in traj.snapshots])
    alpha = np.array([[lp_norm_power(p.rho1, d.alpha1), lp_norm_power(p.rho2, d.alpha2)] for p in traj.snapshots])
    T = traj.n_steps * traj.tau
    consts = {
        "lm_sup": float(norms.max()),
        "lm_max_increase": float(np.max(np.diff(norms))) if norms.size > 1 else 0.0,
        "l_alpha_sup": [float(alpha[:, 0].max()), float(alpha[:, 1].max())],
    }
    if d.is_zero:
        return DiagnosticEntry("norm_bounds", True, 0.0, None, consts, "no diffusion: bound is vacuous")
    if c_exd2 is None:
        c_exd2 = _exd2_constant(model)
    C = model.cross_lip_sq
    bound = (f_tilde(traj.snapshots[0], model) + C * T - _self_floor(model, traj.grid)) / c_exd2
    slack = norms - bound
    k = int(np.argmax(slack))
    consts.update(bound=float(bound), c_exd2=float(c_exd2), C=float(C))
    return DiagnosticEntry("norm_bounds", bool(slack[k] <= 0.0), float(slack[k]), {"snapshot": k, "t": float(k * traj.tau)}, consts)


# ---------------------------------------------------------- flow interchange


def heat_step(rho: np.ndarray, grid: Grid1D, s: float, n_steps: int = 1) -> np.ndarray:
    """``n_steps`` backward-Euler steps of the heat equation with no-flux ends, total time ``s``."""
    n = rho.shape[0]
    ds = s / n_steps
    lam = ds / grid.h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -lam
    ab[2, :-1] = -lam
    ab[1, :] = 1.0 + 2.0 * lam
    ab[1, 0] = ab[1, -1] = 1.0 + lam
    out = np.asarray(rho, dtype=float)
    for _ in range(n_steps):
        out = solve_banded((1, 1), ab, out)
    if not np.all(np.isfinite(out)) or out.min() < -1e-14 * max(1.0, out.max()):
        raise HeatStepUnstable("implicit heat step produced negative or non-finite values")
    return np.maximum(out, 0.0)


def heat_flow(pair: SpeciesPair, s: float, n_steps: int = 1) -> SpeciesPair:
    g = pair.grid
    return SpeciesPair(
        normalize(heat_step(pair.rho1.values, g, s, n_steps), g),
        normalize(heat_step(pair.rho2.values, g, s, n_steps), g),
    )


def gradient_energy(pair: SpeciesPair, model: ModelSpec) -> float:
    """``sum_i h * sum_faces ((eta_i[j+1] - eta_i[j]) / h)**2`` with ``eta_i = rho_i**(m_i/2)``."""
    d = model.diffusion
    h = pair.grid.h
    total = 0.0
    for rho, m in ((pair.rho1, d.m1), (pair.rho2, d.m2)):
        eta = np.power(rho.values, 0.5 * m)
        total += float(np.sum(np.diff(eta) ** 2) / h)
    return total


def check_flow_interchange(traj: Trajectory, model: ModelSpec, s_max: float = 1e-4, n_heat_steps: int = 1, rel_tol: float = FLOW_REL_TOL) -> DiagnosticEntry:
    """Dissipation of the step energy along the heat flow, step by step.

    For each step the heat flow is run from the new state for time
    ``min(s_max, HEAT_LAMBDA h**2)`` and ``D`` is the finite-``s`` dissipation quotient of the
    relative energy.  Asserted per step, with slack relative to ``1 + |D|``:

    * ``D >= C1 * G(rho^{n+1}) - Cbar`` where ``G`` is the discrete
      ``sum_i ||d_x rho_i**(m_i/2)||**2`` and ``Cbar`` the sum of the
      kernels' Laplacian bounds;
    * ``tau * D <= E[rho^n] - E[rho^{n+1}]`` with ``E`` the entropy.

    The accumulated ``sum tau G`` is compared with the telescoped bound
    ``(E[rho_0] - E[rho_N] + Cbar T) / C1``; its excess is measured against
    the sum of the per-step allowances of the two inequalities.
    """
    tau = traj.tau
    d = model.diffusion
    # the quotient's bias relative to the s -> 0 rate grows like s / h**2
    s_max = min(s_max, HEAT_LAMBDA * traj.grid.h**2)
    C1 = 0.0 if d.is_zero else float(d.C1)
    Cbar = model.laplacian_total
    snaps = traj.snapshots
    ent = np.array([entropy(p) for p in snaps])
    worst3 = worst4 = -np.inf
    wit3 = wit4 = None
    acc = 0.0
    Ds = []
    for n in range(traj.n_steps):
        prev, new = snaps[n], snaps[n + 1]
        if model.is_zero:
            D = 0.0
        else:
            heated = heat_flow(new, s_max, n_heat_steps)
            D = (relative_energy(new, prev, model).total - relative_energy(heated, prev, model).total) / s_max
        G = gradient_energy(new, model) if not d.is_zero else 0.0
        acc += tau * G
        Ds.append(D)
        norm = 1.0 + abs(D)
        v3 = (C1 * G - Cbar - D) / norm
        v4 = (tau * D - (ent[n] - ent[n + 1])) / norm
        if v3 > worst3:
            worst3, wit3 = v3, {"step": n, "D": D, "G": G}
        if v4 > worst4:
            worst4, wit4 = v4, {"step": n, "D": D, "entropy_drop": float(ent[n] - ent[n + 1])}
    T = traj.n_steps * tau
    consts = {"C1": C1, "Cbar": Cbar, "s_max": s_max, "accumulated_gradient": acc, "worst_iii": worst3, "worst_iv": worst4}
    passed = True
    worst_v = 0.0
    if traj.n_steps:
        passed = worst3 <= rel_tol and worst4 <= rel_tol
        if C1 > 0:
            h1 = (ent[0] - ent[-1] + Cbar * T) / C1
            consts["h1_bound"] = float(h1)
            # summing tau * (iii) and (iv) gives C1 * acc <= C1 * h1 up to the
            # summed per-step allowances, which normalize the excess
            allowance = float(np.sum((1.0 + tau) * (1.0 + np.abs(Ds))))
            worst_v = C1 * (acc - h1) / allowance
            passed = passed and worst_v <= rel_tol
    consts["worst_v"] = worst_v
    worst = max(worst3, worst4, worst_v) if traj.n_steps else 0.0
    witness = wit3 if worst == worst3 else wit4
    return DiagnosticEntry("flow_interchange", bool(passed), float(worst), witness, consts, f"{traj.n_steps} steps, {n_heat_steps} heat substeps")


# ------------------------------------------------------------ entropy bounds


def _gaussian_entropy_constant() -> float:
    """``sup_m 0.5 log(2 pi e m) / (m + 1)**0.75``: the variance bound on one density."""
    m = np.geomspace(1e-3, 1e4, 20001)
    return float(np.max(0.5 * np.log(2 * np.pi * np.e * m) / (m + 1.0) ** 0.75))


ENTROPY_LOWER_C = 2.0 * _gaussian_entropy_constant()


def check_entropy_bounds(traj: Trajectory, model: ModelSpec | None = None, C: float | None = None) -> DiagnosticEntry:
    """Lower bound ``E >= -C (m2 + 1)**(3/4)`` and upper bound ``E <= ||rho1||^m1 + ||rho2||^m2``.

    ``m2`` is the total second moment of the pair.  The default ``C`` follows
    from the Gaussian maximizing entropy at fixed variance, applied to each
    species.  Without a model the exponents default to those of the
    trajectory's model.
    """
    model = traj.model if model is None else model
    h2 = traj.grid.h ** 2 / 12.0  # second moment of a cell about its center
    C = ENTROPY_LOWER_C if C is None else float(C)
    lo_worst, up_worst = -np.inf, -np.inf
    lo_wit = up_wit = None
    fitted = 0.0
    for k, p in enumerate(traj.snapshots):
        e = entropy(p)
        m2 = second_moment(p.rho1) + second_moment(p.rho2) + 2 * h2
        env = (m2 + 1.0) ** 0.75
        fitted = max(fitted, -e / env)
        s_lo = -C * env - e
        s_up = e - lm_sum(p, model)
        if s_lo > lo_worst:
            lo_worst, lo_wit = s_lo, k
        if s_up > up_worst:
            up_worst, up_wit = s_up, k
    passed = lo_worst <= ENTROPY_TOL and up_worst <= ENTROPY_TOL
    return DiagnosticEntry(
        "entropy_bounds",
        bool(passed),
        float(max(lo_worst, up_worst)),
        {"lower_snapshot": lo_wit, "upper_snapshot": up_wit},
        {"C": C, "C_fitted": float(fitted), "lower_slack": float(lo_worst), "upper_slack": float(up_worst)},
    )


# -------------------------------------------------------------- weak residual


def self_interaction_term(H, rho: Density, dphi: np.ndarray, symmetrized: bool = True) -> float:
    """``0.5 * sum_ab H'(x_a - x_b) (phi'(x_a) - phi'(x_b)) rho_a rho_b h**2``.

    With ``symmetrized=False`` the equivalent one-sided form
    ``sum_a (H' * rho)(x_a) phi'(x_a) rho_a h`` is used instead.
    """
    if H.is_zero:
        return 0.0
    g = rho.grid
    r = rho.values
    if not symmetrized:
        return float(g.h * np.dot(convolve(H, rho, at="center_grad") * dphi, r))
    x = g.centers
    M = H.grad(x[:, None] - x[None, :]) * (dphi[:, None] - dphi[None, :])
    return float(0.5 * g.h**2 * (r @ M @ r))


def _step_rhs(model: ModelSpec, new: SpeciesPair, prev: SpeciesPair, phi: TestFunction, species: int) -> float:
    g = new.grid
    h = g.h
    i = species - 1
    rho = new[i]
    other_prev = prev[1 - i]
    faces = g.faces[1:-1]
    total = 0.0
    d = model.diffusion
    if not d.is_zero:
        a = d.A_grad(new.rho1.values, new.rho2.values)[i]
        avg = 0.5 * (rho.values[:-1] + rho.values[1:])
        total += float(np.sum(avg * np.diff(a) * phi.gradient(faces)))
    dphi_c = phi.gradient(g.centers)
    H = model.H1 if i == 0 else model.H2
    K = model.K1 if i == 0 else model.K2
    total += self_interaction_term(H, rho, dphi_c)
    if not K.is_zero:
        total += float(h * np.dot(convolve(K, other_prev, at="center_grad") * dphi_c, rho.values))
    return total


def weak_residual(traj: Trajectory, model: ModelSpec, phi: TestFunction, species: int, t_window: tuple[float, float]) -> float:
    """Residual of the discrete weak formulation on a time window.

    ``|int phi d rho(t2) - int phi d rho(t1) + tau sum_n R_n|`` where ``R_n``
    collects the diffusion, self-interaction and cross-interaction terms at
    step ``n`` with the opposite species taken one step earlier.
    """
    if species not in (1, 2):
        raise ValueError("species must be 1 or 2")
    t1, t2 = t_window
    end = traj.n_steps * traj.tau
    if not (0 <= t1 < t2 <= end * (1 + 1e-12)):
        raise UnsupportedWindow(f"window {t_window} not inside [0, {end}]")
    g = traj.grid
    a, b = phi.support
    margin = 5 * g.h
    if a < g.x_min + margin or b > g.x_max - margin:
        raise UnsupportedWindow("test function support reaches the boundary cells")
    snaps = traj.snapshots
    n1 = _index(traj, t1)
    n2 = _index(traj, t2)
    if n2 <= n1:
        raise UnsupportedWindow(f"window {t_window} contains no step")
    pv = phi.value(g.centers)
    mass = lambda k: float(g.h * np.dot(pv, snaps[k][species - 1].values))  # noqa: E731
    acc = sum(_step_rhs(model, snaps[k], snaps[k - 1], phi, species) for k in range(n1 + 1, n2 + 1))
    return abs(mass(n2) - mass(n1) + traj.tau * acc)


def _index(traj: Trajectory, t: float) -> int:
    interpolate(traj, t)  # range check
    return 0 if t == 0 else int(math.ceil(t / traj.tau - 1e-9))


# ---------------------------------------------------- difference quotient


def difference_quotient_error(f, grid: Grid1D, zeta: TestFunction, eps: float) -> np.ndarray:
    """Pointwise ``(f o P - f) / eps - zeta * f'`` at the cell centers, ``P = id + eps * zeta``."""
    f = np.asarray(f, dtype=float)
    x = grid.centers
    z = zeta.value(x)
    px = x + eps * z
    if px.min() < x[0] - 1e-15 or px.max() > x[-1] + 1e-15:
        raise ImageEscapesGrid("perturbed points leave the sampled range")
    fp = np.gradient(f, grid.h)
    return (np.interp(px, x, f) - f) / eps - z * fp


def check_difference_quotient(f, grid: Grid1D, zeta: TestFunction, eps_list=(1e-2, 5e-3, 2.5e-3)) -> DiagnosticEntry:
    """First-order convergence of the perturbation quotient in ``L^2``.

    Errors must decrease along ``eps_list`` (sorted decreasingly) and each
    consecutive pair must show at least the reduction ``DQ_RATIO`` expected
    per halving, rescaled to the actual ratio of the ``eps`` values.
    """
    eps = np.sort(np.asarray(eps_list, dtype=float))[::-1]
    lip = zeta.lipschitz()
    if eps[0] * lip >= 1.0:
        raise NonMonotonePerturbation(f"eps * Lip(zeta) = {eps[0] * lip:.3g} >= 1")
    errs = np.array([float(np.sqrt(grid.h * np.sum(difference_quotient_error(f, grid, zeta, e) ** 2))) for e in eps])
    consts = {"eps": eps.tolist(), "errors": errs.tolist()}
    if errs.max() == 0.0:
        return DiagnosticEntry("difference_quotient", True, 0.0, None, consts, "quotient is exact")
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.log(errs[:-1] / errs[1:]) / np.log(eps[:-1] / eps[1:])
    per_halving = np.power(2.0, rates)
    consts["ratios_per_halving"] = per_halving.tolist()
    monotone = bool(np.all(np.diff(errs) < 0))
    k = int(np.argmin(per_halving))
    passed = monotone and per_halving[k] >= DQ_RATIO
    return DiagnosticEntry("difference_quotient", bool(passed), float(DQ_RATIO - per_halving[k]), {"eps": float(eps[k])}, consts)


# ------------------------------------------------------ per-step inequalities


def check_scheme_inequality(traj: Trajectory) -> DiagnosticEntry:
    """One-step inequality ``W**2 / (2 tau) <= F[rho^n|rho^n] - F[rho^{n+1}|rho^n]`` up to ``inner_tol``."""
    tol = traj.config.inner_tol
    if not traj.records:
        return DiagnosticEntry("scheme_inequality", True, 0.0, None, {"inner_tol": tol}, "no step records")
    s = np.array([r.scheme_slack(traj.tau) for r in traj.records])
    k = int(np.argmax(s))
    frac = float(np.mean(s <= tol))
    return DiagnosticEntry("scheme_inequality", bool(s[k] <= tol), float(s[k]), {"step": k}, {"inner_tol": tol, "fraction_holding": frac})


def dissipation_slacks(traj: Trajectory, model: ModelSpec) -> np.ndarray:
    """Per-step ``W**2 / (4 tau) - (F_tilde^n - F_tilde^{n+1}) - C tau``."""
    tau = traj.tau
    C = model.cross_lip_sq
    ft = np.array([f_tilde(p, model) for p in traj.snapshots])
    w = np.array([product_w2_sq_of(traj, n) for n in range(traj.n_steps)])
    return w / (4.0 * tau) - (ft[:-1] - ft[1:]) - C * tau


def product_w2_sq_of(traj: Trajectory, n: int) -> float:
    if traj.records:
        return traj.records[n].w2_sq
    a, b = traj.snapshots[n], traj.snapshots[n + 1]
    return w2_squared(a.rho1, b.rho1) + w2_squared(a.rho2, b.rho2)


def check_dissipation(traj: Trajectory, model: ModelSpec) -> DiagnosticEntry:
    """Strengthened per-step dissipation with the Lipschitz constants of the cross kernels.

    Also tracks the consequence ``F_tilde^n <= F_tilde^0 + C n tau``.
    """
    tol = traj.config.inner_tol + DISSIPATION_TOL
    C = model.cross_lip_sq
    if traj.n_steps == 0:
        return DiagnosticEntry("dissipation", True, 0.0, None, {"C": C})
    if not np.isfinite(C):
        return DiagnosticEntry("dissipation", True, -np.inf, None, {"C": C}, "cross kernel not Lipschitz: bound is vacuous")
    s = dissipation_slacks(traj, model)
    k = int(np.argmax(s))
    ft = np.array([f_tilde(p, model) for p in traj.snapshots])
    growth = ft - ft[0] - C * traj.tau * np.arange(ft.size)
    consts = {"C": C, "tol": tol, "fraction_holding": float(np.mean(s <= tol)), "ftilde_growth_slack": float(growth.max())}
    passed = s[k] <= tol and growth.max() <= tol * traj.n_steps
    return DiagnosticEntry("dissipation", bool(passed), float(s[k]), {"step": k}, consts)


def check_moments(traj: Trajectory) -> DiagnosticEntry:
    """``m2(b) <= 2 m2(a) + 2 W**2(a, b)`` per species, both orders, on consecutive snapshots."""
    worst, wit = -np.inf, None
    snaps = traj.snapshots
    for n in range(traj.n_steps):
        for i in (0, 1):
            a, b = snaps[n][i], snaps[n + 1][i]
            w = w2_squared(a, b)
            ma, mb = second_moment(a), second_moment(b)
            for lhs, rhs in ((mb, ma), (ma, mb)):
                s = lhs - 2 * rhs - 2 * w - MOMENT_TOL
                if s > worst:
                    worst, wit = s, {"step": n, "species": i + 1}
    if worst == -np.inf:
        worst = 0.0
    return DiagnosticEntry("moment_inequality", bool(worst <= 0.0), float(worst), wit)


def check_conservation(traj: Trajectory, tol: float = 1e-12) -> DiagnosticEntry:
    worst_mass, neg = 0.0, 0
    for p in traj.snapshots:
        for rho in p:
            worst_mass = max(worst_mass, abs(rho.mass - 1.0))
            neg += int(np.sum(rho.values < 0))
    return DiagnosticEntry("conservation", bool(worst_mass <= tol and neg == 0), float(worst_mass - tol), None, {"mass_error": worst_mass, "negative_values": neg})


# ----------------------------------------------------------------- assembly


DEFAULT_CHECKS = ("conservation", "scheme_inequality", "dissipation", "moment_inequality", "holder", "norm_bounds", "entropy_bounds", "flow_interchange")


def diagnose(
    traj: Trajectory, model: ModelSpec | None = None, checks=DEFAULT_CHECKS, s_max: float = 1e-4, n_heat_steps: int = 1,
    holder_pairs: int = 100, holder_c: float | None = None, entropy_C: float | None = None,
) -> DiagnosticsReport:
    """Run the selected checks in a fixed order.

    ``holder_c`` and ``entropy_C`` replace the constants the checks would
    otherwise fit on the trajectory itself.
    """
    model = traj.model if model is None else model
    rep = DiagnosticsReport(f"{traj.label}:{model.name}")
    for name in checks:
        if name == "conservation":
            rep.entries.append(check_conservation(traj))
        elif name == "scheme_inequality":
            rep.entries.append(check_scheme_inequality(traj))
        elif name == "dissipation":
            rep.entries.append(check_dissipation(traj, model))
        elif name == "moment_inequality":
            rep.entries.append(check_moments(traj))
        elif name == "holder":
            if traj.n_steps < MIN_HOLDER_STEPS:
                rep.entries.append(DiagnosticEntry("holder", True, 0.0, None, {}, f"skipped: fewer than {MIN_HOLDER_STEPS} steps"))
            else:
                rep.entries.append(check_holder(traj, n_pairs=holder_pairs, c=holder_c))
        elif name == "norm_bounds":
            rep.entries.append(check_norm_bounds(traj, model))
        elif name == "entropy_bounds":
            rep.entries.append(check_entropy_bounds(traj, model, C=entropy_C))
        elif name == "flow_interchange":
            rep.entries.append(check_flow_interchange(traj, model, s_max, n_heat_steps))
        else:
            raise ValueError(f"unknown check {name!r}")
    return rep
