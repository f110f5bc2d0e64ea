"""Diffusion function, interaction kernels and the energy functionals.

The diffusion function is stored as a finite sum of terms in the variables
``eta_i = rho_i**(m_i/2)``.  Every term knows its value and derivatives both
in ``eta`` (where the function is regular at vacuum) and directly in the
densities (needed by the Euler-Lagrange potential and the finite-volume
fluxes).  Energies are always evaluated through the ``eta`` form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .errors import GridMismatch, KindMismatch
from .grid import Density, SpeciesPair

SELF_KINDS = ("self_H1", "self_H2")
CROSS_KINDS = ("cross_K1", "cross_K2")


def _dpow(x, e: float, k: int):
    """k-th derivative of ``x**e`` with ``0**0 = 1`` and zero when the falling factorial vanishes."""
    coef = 1.0
    for i in range(k):
        coef *= e - i
    x = np.asarray(x, dtype=float)
    if coef == 0.0:
        return np.zeros_like(x)
    p = e - k
    if p == 0:
        return np.full_like(x, coef)
    if p == 1:
        return coef * x
    if p == 2:
        return coef * x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        return coef * np.power(x, p)


@dataclass(frozen=True)
class PowerTerm:
    """``coef * eta1**p * eta2**q``."""

    coef: float
    p: float
    q: float

    def eta(self, e1, e2, m1, m2, order=2):
        c, p, q = self.coef, self.p, self.q
        x0, y0 = _dpow(e1, p, 0), _dpow(e2, q, 0)
        out = [c * x0 * y0]
        if order >= 1:
            x1, y1 = _dpow(e1, p, 1), _dpow(e2, q, 1)
            out.append((c * x1 * y0, c * x0 * y1))
        if order >= 2:
            out.append((c * _dpow(e1, p, 2) * y0, c * x1 * y1, c * x0 * _dpow(e2, q, 2)))
        return out

    def rho(self, r1, r2, m1, m2, order=2):
        return PowerTerm(self.coef, self.p * m1 / 2.0, self.q * m2 / 2.0).eta(r1, r2, 0, 0, order)


@dataclass(frozen=True)
class SumPowerTerm:
    """``coef * (rho1 + rho2)**k``."""

    coef: float
    k: float

    def rho(self, r1, r2, m1, m2, order=2):
        s = np.asarray(r1, dtype=float) + np.asarray(r2, dtype=float)
        c = self.coef
        out = [c * _dpow(s, self.k, 0)]
        if order >= 1:
            d1 = c * _dpow(s, self.k, 1)
            out.append((d1, d1))
        if order >= 2:
            d2 = c * _dpow(s, self.k, 2)
            out.append((d2, d2, d2))
        return out

    def eta(self, e1, e2, m1, m2, order=2):
        r1, r2 = 2.0 / m1, 2.0 / m2
        e1 = np.asarray(e1, dtype=float)
        e2 = np.asarray(e2, dtype=float)
        s = _dpow(e1, r1, 0) + _dpow(e2, r2, 0)
        c, k = self.coef, self.k
        out = [c * _dpow(s, k, 0)]
        if order == 0:
            return out
        f1 = c * _dpow(s, k, 1)
        u1, u2 = _dpow(e1, r1, 1), _dpow(e2, r2, 1)
        out.append((f1 * u1, f1 * u2))
        if order >= 2:
            f2 = c * _dpow(s, k, 2)
            with np.errstate(invalid="ignore"):
                h11 = f2 * u1 * u1 + f1 * _dpow(e1, r1, 2)
                h22 = f2 * u2 * u2 + f1 * _dpow(e2, r2, 2)
                h12 = f2 * u1 * u2
            out.append((h11, h12, h22))
        return out


Term = PowerTerm | SumPowerTerm


@dataclass(frozen=True)
class DiffusionSpec:
    """The diffusion function ``A(rho1, rho2) = B(rho1**(m1/2), rho2**(m2/2))``.

    Parameters
    ----------
    m1, m2 : float
        Porous-medium exponents, both > 1.
    terms : tuple
        Summands of ``B``.
    C1 : float
        Declared coercivity constant of the weighted Hessian bound.
    alpha1, alpha2 : float
        Growth exponents, ``m_i <= alpha_i < 3 m_i``.
    rho1_max : float or None
        Upper end of the admissible range of ``rho1`` when the structural
        bounds only hold on a bounded strip.
    """

    m1: float = 2.0
    m2: float = 2.0
    terms: tuple = ()
    C1: float = 0.0
    alpha1: float | None = None
    alpha2: float | None = None
    name: str = "custom"
    rho1_max: float | None = None

    def __post_init__(self):
        for key in ("m1", "m2"):
            if not getattr(self, key) > 1.0:
                raise ValueError(f"{key} must exceed 1, got {getattr(self, key)}")
        if self.alpha1 is None:
            object.__setattr__(self, "alpha1", float(self.m1))
        if self.alpha2 is None:
            object.__setattr__(self, "alpha2", float(self.m2))
        for a, m, key in ((self.alpha1, self.m1, "alpha1"), (self.alpha2, self.m2, "alpha2")):
            if not m <= a < 3.0 * m:
                raise ValueError(f"{key}={a} must lie in [{m}, {3.0 * m})")
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def is_zero(self) -> bool:
        return all(t.coef == 0.0 for t in self.terms)

    def _sum(self, method, x1, x2, order):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        acc = None
        for t in self.terms:
            part = getattr(t, method)(x1, x2, self.m1, self.m2, order)[order]
            part = part if order == 0 else list(part)
            if acc is None:
                acc = part
            elif order == 0:
                acc = acc + part
            else:
                acc = [a + b for a, b in zip(acc, part)]
        if acc is None:
            z = np.zeros(np.broadcast(x1, x2).shape)
            return z if order == 0 else tuple(z.copy() for _ in range(order + 1))
        return acc if order == 0 else tuple(acc)

    def B(self, e1, e2):
        return self._sum("eta", e1, e2, 0)

    def B_grad(self, e1, e2):
        return self._sum("eta", e1, e2, 1)

    def B_hess(self, e1, e2):
        """``(B_11, B_12, B_22)`` in the ``eta`` variables."""
        return self._sum("eta", e1, e2, 2)

    def etas(self, r1, r2):
        return np.power(r1, self.m1 / 2.0), np.power(r2, self.m2 / 2.0)

    def A(self, r1, r2):
        return self.B(*self.etas(r1, r2))

    def A_grad(self, r1, r2):
        """``(A_rho1, A_rho2)``."""
        return self._sum("rho", r1, r2, 1)

    def A_hess(self, r1, r2):
        """``(A_11, A_12, A_22)`` in the density variables."""
        return self._sum("rho", r1, r2, 2)


@dataclass(frozen=True)
class PotentialSpec:
    """An interaction kernel from a small library of closed forms.

    ``form`` is one of ``"zero"``, ``"quadratic"`` (``coef * x**2 / 2``),
    ``"gaussian"`` (``coef * exp(-x**2 / width**2)``) or ``"abs"``
    (``coef * |x|``).  Structural constants default to their analytic
    values and may be overridden to declare weaker ones.
    """

    kind: str
    form: str = "zero"
    coef: float = 0.0
    width: float = 1.0
    lip_value: float | None = None
    lip_grad: float | None = None
    laplacian_bound: float | None = None
    growth_lower: float | None = None
    growth_upper: float | None = None
    growth_alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in SELF_KINDS + CROSS_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.form not in ("zero", "quadratic", "gaussian", "abs"):
            raise ValueError(f"unknown kernel form {self.form!r}")
        if self.form == "gaussian" and not self.width > 0:
            raise ValueError("gaussian width must be positive")
        defaults = self._analytic_constants()
        for key, val in defaults.items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)

    def _analytic_constants(self) -> dict:
        c, s = self.coef, self.width
        ac = abs(c)
        if self.form == "zero":
            return dict(lip_value=0.0, lip_grad=0.0, laplacian_bound=0.0, growth_lower=1.0, growth_upper=1.0)
        if self.form == "quadratic":
            return dict(
                lip_value=np.inf if c else 0.0,
                lip_grad=ac,
                laplacian_bound=max(c, 0.0),
                growth_lower=1.0,
                growth_upper=max(c / 2.0, 1e-300) if c >= 0 else 1.0,
            )
        if self.form == "gaussian":
            lap_sup = -2.0 * c / s**2 if c < 0 else 4.0 * c * np.exp(-1.5) / s**2
            return dict(
                lip_value=ac * np.sqrt(2.0 / np.e) / s,
                lip_grad=2.0 * ac / s**2,
                laplacian_bound=max(lap_sup, 0.0),
                growth_lower=max(2.0 * ac, 1e-300),
                growth_upper=max(2.0 * ac, 1e-300),
            )
        # abs: the Laplacian is 2*coef*delta_0, no finite bound when coef > 0
        return dict(
            lip_value=ac,
            lip_grad=np.inf if c else 0.0,
            laplacian_bound=0.0,
            growth_lower=max(ac, 1e-300),
            growth_upper=max(ac, 1e-300),
        )

    @property
    def is_self(self) -> bool:
        return self.kind in SELF_KINDS

    @property
    def is_zero(self) -> bool:
        return self.form == "zero" or self.coef == 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coef
        if self.form == "quadratic":
            return 0.5 * c * x * x
        if self.form == "gaussian":
            return c * np.exp(-((x / self.width) ** 2))
        if self.form == "abs":
            return c * np.abs(x)
        return np.zeros_like(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coef
        if self.form == "quadratic":
            return c * x
        if self.form == "gaussian":
            s2 = self.width**2
            return -2.0 * c * x / s2 * np.exp(-x * x / s2)
        if self.form == "abs":
            return c * np.sign(x)
        return np.zeros_like(x)

    def laplacian(self, x):
        """Pointwise second derivative (the absolutely continuous part)."""
        x = np.asarray(x, dtype=float)
        c = self.coef
        if self.form == "quadratic":
            return np.full_like(x, c)
        if self.form == "gaussian":
            s2 = self.width**2
            return c * (4.0 * x * x / s2**2 - 2.0 / s2) * np.exp(-x * x / s2)
        return np.zeros_like(x)


def zero_potential(kind: str) -> PotentialSpec:
    return PotentialSpec(kind)


@dataclass(frozen=True)
class ModelSpec:
    diffusion: DiffusionSpec = field(default_factory=DiffusionSpec)
    H1: PotentialSpec = field(default_factory=lambda: zero_potential("self_H1"))
    H2: PotentialSpec = field(default_factory=lambda: zero_potential("self_H2"))
    K1: PotentialSpec = field(default_factory=lambda: zero_potential("cross_K1"))
    K2: PotentialSpec = field(default_factory=lambda: zero_potential("cross_K2"))
    name: str = "custom"

    def __post_init__(self):
        for key, kinds in (("H1", ("self_H1",)), ("H2", ("self_H2",)), ("K1", ("cross_K1",)), ("K2", ("cross_K2",))):
            if getattr(self, key).kind not in kinds:
                raise KindMismatch(f"{key} must have kind {kinds[0]}, got {getattr(self, key).kind}")

    @property
    def cross_lip_sq(self) -> float:
        """``Lip(K1)**2 + Lip(K2)**2``."""
        return float(self.K1.lip_value**2 + self.K2.lip_value**2)

    @property
    def laplacian_total(self) -> float:
        """Sum of the declared Laplacian bounds of all four kernels."""
        return float(sum(p.laplacian_bound for p in (self.H1, self.H2, self.K1, self.K2)))

    @property
    def is_zero(self) -> bool:
        return self.diffusion.is_zero and all(p.is_zero for p in (self.H1, self.H2, self.K1, self.K2))

    def scaled_cross(self, factor: float) -> ModelSpec:
        return replace(self, K1=replace(self.K1, coef=self.K1.coef * factor), K2=replace(self.K2, coef=self.K2.coef * factor))


# ---------------------------------------------------------------- energies


def convolve(kernel: PotentialSpec, rho: Density, at: str = "centers") -> np.ndarray:
    """``(kernel * rho)`` on the grid by the direct double sum.

    ``at="centers"`` evaluates the potential at cell centers; ``at="faces"``
    evaluates the gradient of the kernel at the interior faces.
    """
    g = rho.grid
    if kernel.is_zero:
        n = g.n_cells if at == "centers" else g.n_cells - 1
        return np.zeros(n)
    if at == "centers":
        return g.h * kernels.toeplitz_conv(kernel.value(g.offsets), rho.values)
    if at == "faces":
        # face j+1/2 sits at center j + h/2
        kv = kernel.grad(g.offsets + 0.5 * g.h)
        return g.h * kernels.toeplitz_conv(kv, rho.values)[:-1]
    if at == "center_grad":
        return g.h * kernels.toeplitz_conv(kernel.grad(g.offsets), rho.values)
    raise ValueError(f"unknown location {at!r}")


def diffusion_energy(pair: SpeciesPair, spec: DiffusionSpec) -> float:
    """``h * sum(A(rho1, rho2))`` evaluated through ``B``."""
    if spec.is_zero:
        return 0.0
    e1, e2 = spec.etas(pair.rho1.values, pair.rho2.values)
    return float(pair.grid.h * np.sum(spec.B(e1, e2)))


def self_energy(rho: Density, H: PotentialSpec) -> float:
    if not H.is_self:
        raise KindMismatch(f"self energy needs a self kernel, got {H.kind}")
    if H.is_zero:
        return 0.0
    return float(0.5 * rho.grid.h * np.dot(convolve(H, rho), rho.values))


def cross_energy(mu: Density, nu_frozen: Density, K: PotentialSpec) -> float:
    if K.is_self:
        raise KindMismatch(f"cross energy needs a cross kernel, got {K.kind}")
    if mu.grid != nu_frozen.grid:
        raise GridMismatch("densities live on different grids")
    if K.is_zero:
        return 0.0
    return float(mu.grid.h * np.dot(convolve(K, nu_frozen), mu.values))


@dataclass(frozen=True)
class EnergyBreakdown:
    diffusion: float
    self1: float
    self2: float
    cross1: float
    cross2: float

    @property
    def F_tilde(self) -> float:
        """Diffusion plus self-interaction part."""
        return self.diffusion + self.self1 + self.self2

    @property
    def cross(self) -> float:
        return self.cross1 + self.cross2

    @property
    def total(self) -> float:
        return self.F_tilde + self.cross


def relative_energy(candidate: SpeciesPair, frozen: SpeciesPair, model: ModelSpec) -> EnergyBreakdown:
    """Energy of ``candidate`` with the cross terms taken against ``frozen``."""
    return EnergyBreakdown(
        diffusion=diffusion_energy(candidate, model.diffusion),
        self1=self_energy(candidate.rho1, model.H1),
        self2=self_energy(candidate.rho2, model.H2),
        cross1=cross_energy(candidate.rho1, frozen.rho2, model.K1),
        cross2=cross_energy(candidate.rho2, frozen.rho1, model.K2),
    )


def f_tilde(pair: SpeciesPair, model: ModelSpec) -> float:
    return (
        diffusion_energy(pair, model.diffusion)
        + self_energy(pair.rho1, model.H1)
        + self_energy(pair.rho2, model.H2)
    )


def first_variation(candidate: SpeciesPair, frozen: SpeciesPair, model: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cell potentials ``A_rho_i + H_i * rho_i + K_i * nu_j`` for both species."""
    d = model.diffusion
    if d.is_zero:
        n = candidate.grid.n_cells
        a1 = a2 = np.zeros(n)
    else:
        a1, a2 = d.A_grad(candidate.rho1.values, candidate.rho2.values)
    p1 = a1 + convolve(model.H1, candidate.rho1) + convolve(model.K1, frozen.rho2)
    p2 = a2 + convolve(model.H2, candidate.rho2) + convolve(model.K2, frozen.rho1)
    return p1, p2


# ------------------------------------------------------------------ presets


def decoupled(a: float = 1.0, b: float = 1.0, m1: float = 2.0, m2: float = 2.0) -> DiffusionSpec:
    """``a rho1**m1 + b rho2**m2``."""
    c1 = min(a * m1 * (m1 - 1.0), b * m2 * (m2 - 1.0))
    return DiffusionSpec(m1, m2, (PowerTerm(a, 2, 0), PowerTerm(b, 0, 2)), C1=c1, name="decoupled")


def quadratic_form(q11: float = 1.0, q12: float = 0.5, q22: float = 1.0, m1: float = 2.0, m2: float = 2.0, C1: float | None = None) -> DiffusionSpec:
    """``q11 eta1**2 + 2 q12 eta1 eta2 + q22 eta2**2``.

    The default declared ``C1`` is exact only for ``m1 = m2 = 2``, where the
    density Hessian is twice the coefficient matrix.
    """
    if C1 is None:
        C1 = 2.0 * float(np.linalg.eigvalsh([[q11, q12], [q12, q22]])[0])
    terms = (PowerTerm(q11, 2, 0), PowerTerm(2.0 * q12, 1, 1), PowerTerm(q22, 0, 2))
    return DiffusionSpec(m1, m2, terms, C1=C1, name="quadratic_form")


def example1(a: float = 1.0, b: float = 1.0, m1: float = 2.0, m2: float = 2.0) -> DiffusionSpec:
    """``a rho1**m1 + b (eta1 + eta2)**2``."""
    return replace(quadratic_form(a + b, b, b, m1, m2), name="example1")


def example2(a: float = 1.0, b: float = 1.0, c: float = 0.1, k: float = 3.0, m: float = 2.0, alpha: float = 5.0) -> DiffusionSpec:
    """``a rho1**m + b rho2**m + c (rho1 + rho2)**k`` with convex ``p``."""
    terms = (PowerTerm(a, 2, 0), PowerTerm(b, 0, 2), SumPowerTerm(c, k))
    c1 = min(a, b) * m * (m - 1.0)
    return DiffusionSpec(m, m, terms, C1=c1, alpha1=alpha, alpha2=alpha, name="example2")


def example3(
    a: float = 1.0, b: float = 1.0, m: float = 1.5, R: float = 4.0, C1: float | None = None, alpha1: float = 2.5, alpha2: float = 4.0
) -> DiffusionSpec:
    """``a rho1**m + b (rho1 + rho2)**2`` on the strip ``0 <= rho1 <= R``.

    The default declared ``C1`` is the exact infimum on the strip, attained
    at ``rho1 = R`` (the weighted Hessian bound only degrades as ``rho1``
    grows, which is why the strip is needed).
    """
    if C1 is None:
        C1 = _strip_c1(a, b, m, R)
    terms = (PowerTerm(a, 2, 0), SumPowerTerm(b, 2.0))
    return DiffusionSpec(m, 2.0, terms, C1=C1, alpha1=alpha1, alpha2=alpha2, name="example3", rho1_max=R)


def _strip_c1(a, b, m, rho1):
    # smallest eigenvalue of the Hessian [[d + 2b, 2b], [2b, 2b]] measured
    # against the weight diag(rho1**(m-2), 1)
    w = rho1 ** (m - 2.0)
    d = a * m * (m - 1.0) * w
    H = np.array([[d + 2 * b, 2 * b], [2 * b, 2 * b]])
    s = np.diag([1.0 / np.sqrt(w), 1.0])
    return float(np.linalg.eigvalsh(s @ H @ s)[0])


def counterexample() -> DiffusionSpec:
    """``(rho1 + rho2)**2``, which is not uniformly convex in the weighted sense."""
    return DiffusionSpec(2.0, 2.0, (SumPowerTerm(1.0, 2.0),), C1=0.0, name="counterexample")


def quadratic_kernel(kind: str, coef: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind, "quadratic", coef)


def gaussian_kernel(kind: str, coef: float = -1.0, width: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind, "gaussian", coef, width)


def abs_kernel(kind: str, coef: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind, "abs", coef)


def coupled_preset() -> ModelSpec:
    """Quadratic-form cross-diffusion with quadratic confinement and unequal Gaussian cross kernels."""
    return ModelSpec(
        diffusion=example1(1.0, 1.0),
        H1=quadratic_kernel("self_H1", 0.5),
        H2=quadratic_kernel("self_H2", 0.5),
        K1=gaussian_kernel("cross_K1", -1.0, 1.0),
        K2=gaussian_kernel("cross_K2", 0.5, 0.5),
        name="coupled",
    )


DIFFUSION_PRESETS: dict[str, Callable[..., DiffusionSpec]] = {
    "zero": lambda: DiffusionSpec(name="zero"),
    "decoupled": decoupled,
    "quadratic_form": quadratic_form,
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "counterexample": counterexample,
}


def model_preset(name: str) -> ModelSpec:
    """Named complete models used by the CLI and the acceptance runs."""
    if name == "zero":
        return ModelSpec(name="zero")
    if name == "decoupled_pme":
        return ModelSpec(diffusion=decoupled(), name="decoupled_pme")
    if name == "coupled":
        return coupled_preset()
    if name == "coupled_symmetric":
        g = gaussian_kernel("cross_K1", -1.0, 1.0)
        return replace(coupled_preset(), K2=replace(g, kind="cross_K2"), name="coupled_symmetric")
    if name == "attraction":
        return ModelSpec(
            K1=gaussian_kernel("cross_K1", -1.0, 1.0),
            K2=gaussian_kernel("cross_K2", -1.0, 1.0),
            name="attraction",
        )
    if name in DIFFUSION_PRESETS:
        return ModelSpec(diffusion=DIFFUSION_PRESETS[name](), name=name)
    raise KeyError(name)


MODEL_PRESETS = tuple(dict.fromkeys(("zero", "decoupled_pme", "coupled", "coupled_symmetric", "attraction", *DIFFUSION_PRESETS)))
