"""Sampled certification of the structural assumptions on the model.

Audits never raise on a violated assumption; they return an
:class:`AuditReport` whose entries carry the measured quantity, the
declared constant and a witness point.  Sample order is fixed so reports
are reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .model import DiffusionSpec, ModelSpec, PotentialSpec

N_DIRECTIONS = 32
# certified coercivity below this counts as zero
COERCIVITY_FLOOR = 1e-8
GROWTH_TOL = 0.05
FD_STEP = 1e-5
FD_RTOL = 1e-6


@dataclass
class AuditEntry:
    check: str
    passed: bool
    value: float | None = None
    declared: float | None = None
    witness: dict | None = None
    detail: str = ""


@dataclass
class AuditReport:
    subject: str
    entries: list[AuditEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, check: str) -> AuditEntry:
        for e in self.entries:
            if e.check == check:
                return e
        raise KeyError(check)

    def failures(self) -> list[AuditEntry]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {"subject": self.subject, "passed": self.passed, "entries": [_clean(asdict(e)) for e in self.entries]}


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def default_box(spec: DiffusionSpec) -> tuple[float, float, float, float]:
    """``(lo1, hi1, lo2, hi2)``; the first range is capped by ``rho1_max`` when declared."""
    hi1 = spec.rho1_max if spec.rho1_max is not None else 10.0
    return 1e-3, hi1, 1e-3, 10.0


def _fan(n: int = N_DIRECTIONS):
    th = np.arange(n) * np.pi / n
    return np.cos(th), np.sin(th)


def weighted_coercivity(spec: DiffusionSpec, xi1, xi2):
    """Minimum over the direction fan of the weighted Hessian ratio at each sample.

    Returns ``(ratio, direction_index)`` arrays shaped like the samples.
    """
    a11, a12, a22 = spec.A_hess(xi1, xi2)
    w1 = np.power(xi1, spec.m1 - 2.0)
    w2 = np.power(xi2, spec.m2 - 2.0)
    c, s = _fan()
    c = c.reshape((-1,) + (1,) * np.ndim(xi1))
    s = s.reshape((-1,) + (1,) * np.ndim(xi1))
    num = a11 * c * c + 2.0 * a12 * c * s + a22 * s * s
    den = w1 * c * c + w2 * s * s
    r = num / den
    k = np.argmin(r, axis=0)
    return np.take_along_axis(r, k[None], axis=0)[0], k


def weighted_min_eigenvalue(spec: DiffusionSpec, xi1, xi2):
    """Exact smallest eigenvalue of the Hessian measured against ``diag(xi**(m-2))``."""
    a11, a12, a22 = spec.A_hess(xi1, xi2)
    w1 = np.power(xi1, spec.m1 - 2.0)
    w2 = np.power(xi2, spec.m2 - 2.0)
    t = a11 / w1 + a22 / w2
    det = (a11 * a22 - a12 * a12) / (w1 * w2)
    return 0.5 * (t - np.sqrt(np.maximum(t * t - 4.0 * det, 0.0)))


def audit_diffusion(spec: DiffusionSpec, sample_box=None, n_samples: int = 40) -> AuditReport:
    """Audit positivity and normalization, the growth exponents and the weighted convexity bound."""
    rep = AuditReport(f"diffusion:{spec.name}")
    lo1, hi1, lo2, hi2 = sample_box if sample_box is not None else default_box(spec)
    g1 = np.geomspace(lo1, hi1, n_samples)
    g2 = np.geomspace(lo2, hi2, n_samples)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")

    # normalization at the origin and structural exponents
    b0 = float(spec.B(0.0, 0.0))
    gb = [float(v) for v in spec.B_grad(0.0, 0.0)]
    ok = abs(b0) <= 1e-10 and max(abs(v) for v in gb) <= 1e-10 and spec.m1 > 1 and spec.m2 > 1
    rep.entries.append(AuditEntry("D1_origin", ok, value=max(abs(b0), *map(abs, gb)), declared=1e-10, detail=f"B(0,0)={b0:.3e}, grad={gb}"))
    ax1 = np.concatenate([g1, np.zeros(n_samples), g1])
    ax2 = np.concatenate([np.zeros(n_samples), g2, g2])
    vals = np.concatenate([spec.A(X1, X2).ravel(), spec.A(ax1, ax2)])
    amin = float(vals.min())
    rep.entries.append(AuditEntry("D1_nonnegative", amin >= -1e-12, value=amin, declared=0.0))
    okm = all(m <= a < 3 * m for a, m in ((spec.alpha1, spec.m1), (spec.alpha2, spec.m2)))
    rep.entries.append(AuditEntry("D2_exponent_range", okm, detail=f"alpha=({spec.alpha1}, {spec.alpha2}), m=({spec.m1}, {spec.m2})"))

    rep.entries.extend(_audit_growth(spec))

    if spec.is_zero:
        rep.entries.append(AuditEntry("D3", True, value=0.0, declared=spec.C1, detail="no diffusion: bound is vacuous"))
    else:
        ratio, k = weighted_coercivity(spec, X1, X2)
        exact = weighted_min_eigenvalue(spec, X1, X2)
        cert = float(min(ratio.min(), exact.min()))
        near = ratio <= cert + 1e-12 * max(1.0, abs(cert))
        # among ties prefer the sample closest to vacuum
        closeness = np.where(near, np.minimum(X1, X2), np.inf)
        i, j = np.unravel_index(np.argmin(closeness), closeness.shape)
        th = float(k[i, j] * np.pi / N_DIRECTIONS)
        witness = {"xi1": float(X1[i, j]), "xi2": float(X2[i, j]), "V": [float(np.cos(th)), float(np.sin(th))]}
        passed = cert >= COERCIVITY_FLOOR and cert >= spec.C1 * (1.0 - 1e-9)
        rep.entries.append(AuditEntry("D3", bool(passed), value=cert, declared=spec.C1, witness=witness))

    # A >= C (rho1**m1 + rho2**m2), fitted over the box including the axes
    den = np.concatenate([(X1**spec.m1 + X2**spec.m2).ravel(), ax1**spec.m1 + ax2**spec.m2])
    c_fit = float(np.min(vals / den))
    if spec.is_zero:
        rep.entries.append(AuditEntry("exD2", True, value=0.0, detail="no diffusion: bound is vacuous"))
    else:
        rep.entries.append(AuditEntry("exD2", c_fit > 0, value=c_fit, detail="fitted lower-bound constant"))
    return rep


def _audit_growth(spec: DiffusionSpec) -> list[AuditEntry]:
    r = np.geomspace(10.0, 1e4, 16)
    th = np.linspace(0.1, np.pi / 2 - 0.1, 7)
    R, T = np.meshgrid(r, th, indexing="ij")
    e1 = (R * np.cos(T)).ravel()
    e2 = (R * np.sin(T)).ravel()
    b11, b12, b22 = spec.B_hess(e1, e2)
    out = []
    for name, g in (("D2_eta1eta1", e1 * e1 * b11), ("D2_eta2eta2", e2 * e2 * b22), ("D2_eta1eta2", e1 * e2 * b12)):
        mag = np.abs(g)
        if not np.all(np.isfinite(mag)):
            out.append(AuditEntry(name, False, detail="non-finite second derivative on the growth rays"))
            continue
        if mag.max() <= 1e-300:
            out.append(AuditEntry(name, True, value=0.0, declared=1.0, detail="identically zero"))
            continue
        M = np.column_stack([np.ones_like(e1), np.log(e1), np.log(e2)])
        coef, *_ = np.linalg.lstsq(M, np.log(np.maximum(mag, 1e-300)), rcond=None)
        a, b = float(coef[1]), float(coef[2])
        lhs = a * spec.m1 / (2 * spec.alpha1) + b * spec.m2 / (2 * spec.alpha2)
        out.append(AuditEntry(name, lhs <= 1.0 + GROWTH_TOL, value=lhs, declared=1.0, witness={"a": a, "b": b}))
    return out


def _refined_sup(f, x):
    """``sup |f|`` over samples ``x``, polished by a bounded scalar search around the best sample."""
    v = np.abs(f(x))
    i = int(np.argmax(v))
    best, arg = float(v[i]), float(x[i])
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, len(x) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -abs(float(f(np.array(t)))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    return best, arg


def audit_potential(spec: PotentialSpec, sample_radius: float = 5.0, n_samples: int = 4001) -> AuditReport:
    """Audit evenness, growth envelope, Laplacian bound and regularity of one kernel."""
    rep = AuditReport(f"potential:{spec.kind}:{spec.form}")
    x = np.linspace(-sample_radius, sample_radius, n_samples)
    v = spec.value(x)
    v0 = float(spec.value(0.0))

    if spec.is_self:
        asym = float(np.max(np.abs(v - spec.value(-x))))
        rep.entries.append(AuditEntry("even", asym <= 1e-12 * max(1.0, float(np.abs(v).max())), value=asym, declared=0.0))

    # growth envelope on the kernel shifted to vanish at the origin
    vs = v - v0
    ax = np.abs(x)
    lower = -spec.growth_lower * (1.0 + ax**spec.growth_alpha)
    upper = spec.growth_upper * (1.0 + ax * ax)
    slack_lo = float(np.min(vs - lower))
    slack_hi = float(np.min(upper - vs))
    ok = 0 < spec.growth_alpha < 2 and slack_lo >= -1e-12 and slack_hi >= -1e-12
    rep.entries.append(
        AuditEntry("HK1", bool(ok), value=min(slack_lo, slack_hi), witness={"value_at_0": v0}, detail="envelope checked on value - value(0)")
    )

    # second difference quotients, the origin included
    worst, worst_at = -np.inf, None
    xs = np.concatenate([[0.0], x])
    for d in (1e-1, 1e-2, 1e-3):
        q = (spec.value(xs + d) - 2.0 * spec.value(xs) + spec.value(xs - d)) / (d * d)
        i = int(np.argmax(q))
        if q[i] > worst:
            worst, worst_at = float(q[i]), {"x": float(xs[i]), "delta": d}
    cbar = spec.laplacian_bound
    rep.entries.append(AuditEntry("HK2", bool(worst <= cbar + 1e-8 * (1.0 + abs(cbar))), value=worst, declared=cbar, witness=worst_at))

    if spec.is_self:
        r1 = float(np.max(np.abs(spec.grad(x)) / (1.0 + ax)))
        x2 = 2.0 * x
        r2 = float(np.max(np.abs(spec.grad(x2)) / (1.0 + np.abs(x2))))
        rep.entries.append(AuditEntry("H1", bool(np.isfinite(r2) and r2 <= 1.25 * r1 + 1e-12), value=r2, detail=f"sup on half radius {r1:.6g}"))
    else:
        dx = x[1] - x[0]
        lip_k, at_k = _refined_sup(spec.grad, x)
        lip_k = max(lip_k, float(np.max(np.abs(np.diff(v))) / dx))
        lip_g, at_g = _refined_sup(spec.laplacian, x)
        lip_g = max(lip_g, float(np.max(np.abs(np.diff(spec.grad(x)))) / dx))
        ok_k = np.isfinite(spec.lip_value) and lip_k <= spec.lip_value * (1 + 1e-9) + 1e-15
        ok_g = np.isfinite(spec.lip_grad) and lip_g <= spec.lip_grad * (1 + 1e-9) + 1e-15
        rep.entries.append(AuditEntry("K1_value", bool(ok_k), value=lip_k, declared=spec.lip_value, witness={"x": at_k}))
        rep.entries.append(AuditEntry("K1_grad", bool(ok_g), value=lip_g, declared=spec.lip_grad, witness={"x": at_g}))

    # analytic gradient against centered differences, away from kinks
    xg = x[np.abs(x) > 10 * FD_STEP]
    fd = (spec.value(xg + FD_STEP) - spec.value(xg - FD_STEP)) / (2 * FD_STEP)
    g = spec.grad(xg)
    err = np.abs(fd - g) / np.maximum(np.abs(g), 1.0)
    rep.entries.append(AuditEntry("gradient_fd", bool(err.max() <= FD_RTOL), value=float(err.max()), declared=FD_RTOL))
    return rep


def audit_model(model: ModelSpec, n_samples: int = 40) -> list[AuditReport]:
    out = [audit_diffusion(model.diffusion, n_samples=n_samples)]
    for p in (model.H1, model.H2, model.K1, model.K2):
        out.append(audit_potential(p))
    return out
