from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossjko.errors import KindMismatch
from crossjko.grid import Grid1D, SpeciesPair, lp_norm_power, normalize
from crossjko.model import (
    MODEL_PRESETS,
    ModelSpec,
    convolve,
    counterexample,
    cross_energy,
    decoupled,
    diffusion_energy,
    example1,
    example2,
    example3,
    gaussian_kernel,
    model_preset,
    quadratic_kernel,
    relative_energy,
    self_energy,
)
from crossjko.scenarios import gaussian_density, random_pair, uniform_density

DIFFUSIONS = [decoupled(), example1(), example2(), example3(), counterexample()]


@pytest.mark.parametrize("spec", DIFFUSIONS, ids=lambda s: s.name)
def test_origin_and_nonnegativity(spec):
    assert abs(float(spec.B(0.0, 0.0))) <= 1e-10
    assert np.max(np.abs(spec.B_grad(0.0, 0.0))) <= 1e-10
    r = np.linspace(0, 3, 31)
    R1, R2 = np.meshgrid(r, r)
    assert np.min(spec.A(R1, R2)) >= 0


@pytest.mark.parametrize("spec", DIFFUSIONS[:3], ids=lambda s: s.name)
def test_exponent_range(spec):
    for m, a in ((spec.m1, spec.alpha1), (spec.m2, spec.alpha2)):
        assert m <= a < 3 * m


@pytest.mark.parametrize("spec", DIFFUSIONS, ids=lambda s: s.name)
def test_a_derivatives_match_finite_differences(spec):
    r1, r2 = np.array([0.3, 1.2, 2.0]), np.array([0.7, 0.4, 1.5])
    g1, g2 = spec.A_grad(r1, r2)
    eps = 1e-6
    fd1 = (spec.A(r1 + eps, r2) - spec.A(r1 - eps, r2)) / (2 * eps)
    fd2 = (spec.A(r1, r2 + eps) - spec.A(r1, r2 - eps)) / (2 * eps)
    assert np.allclose(g1, fd1, rtol=1e-6, atol=1e-8)
    assert np.allclose(g2, fd2, rtol=1e-6, atol=1e-8)


def test_diffusion_energy_vacuum_and_example1():
    g = Grid1D(0.0, 2.0, 400)
    u = uniform_density(g, 0.0, 1.0)
    pair = SpeciesPair(u, u)
    # vacuum on [1, 2] adds nothing: the integral equals that over [0, 1]
    assert diffusion_energy(pair, example1()) == pytest.approx(5.0, abs=1e-3)
    assert diffusion_energy(pair, decoupled()) == pytest.approx(2.0, abs=1e-12)


def test_diffusion_lower_bound_with_certified_constant(rng):
    g = Grid1D(-1.0, 1.0, 128)
    spec = example1()
    for _ in range(10):
        p = random_pair(g, rng)
        lhs = diffusion_energy(p, spec)
        assert lhs >= 0.5 * spec.C1 * (lp_norm_power(p.rho1, spec.m1) + lp_norm_power(p.rho2, spec.m2)) - 1e-12


@pytest.mark.parametrize("form", ["quadratic", "gaussian", "abs"])
def test_potential_evenness_origin_and_gradient(form):
    from crossjko.model import PotentialSpec

    H = PotentialSpec("self_H1", form, 0.7, 0.8)
    x = np.linspace(-3, 3, 61)
    assert np.max(np.abs(H.value(x) - H.value(-x))) <= 1e-12
    assert float(H.value(0.0)) == 0.0 or form == "gaussian"
    xs = x[np.abs(x) > 1e-3]
    fd = (H.value(xs + 1e-6) - H.value(xs - 1e-6)) / 2e-6
    assert np.allclose(H.grad(xs), fd, rtol=1e-6, atol=1e-8)


def test_self_energy_oracles():
    g = Grid1D(-1.0, 2.0, 600)
    u = uniform_density(g, 0.0, 1.0)
    assert self_energy(u, quadratic_kernel("self_H1", 0.0)) == 0.0
    H = quadratic_kernel("self_H1", 1.0)
    assert self_energy(u, H) == pytest.approx(1.0 / 24.0, abs=1e-3)
    shifted = uniform_density(g, 0.5, 1.5)
    assert self_energy(shifted, H) == pytest.approx(self_energy(u, H), abs=1e-8)
    with pytest.raises(KindMismatch):
        self_energy(u, gaussian_kernel("cross_K1"))


def test_cross_energy_oracles(rng):
    g = Grid1D(-1.0, 1.0, 101)
    v = np.zeros(101)
    v[50] = 1.0
    point = normalize(v, g)
    K = gaussian_kernel("cross_K1", -1.0, 1.0)
    assert cross_energy(point, point, K) == pytest.approx(-1.0, abs=1e-12)
    assert cross_energy(point, point, gaussian_kernel("cross_K1", 0.0)) == 0.0
    p = random_pair(g, rng)
    x = g.centers
    brute = g.h**2 * np.sum(K.value(x[:, None] - x[None, :]) * np.outer(p.rho1.values, p.rho2.values))
    assert cross_energy(p.rho1, p.rho2, K) == pytest.approx(brute, abs=1e-12)
    with pytest.raises(KindMismatch):
        cross_energy(p.rho1, p.rho2, quadratic_kernel("self_H2"))


def test_relative_energy_zero_model_and_symmetric_case(rng):
    g = Grid1D(-1.5, 1.5, 90)
    p = random_pair(g, rng)
    assert relative_energy(p, p, ModelSpec()).total == 0.0
    model = model_preset("coupled_symmetric")
    e = relative_energy(p, p, model)
    x = g.centers
    d = x[:, None] - x[None, :]
    r1, r2 = p.rho1.values, p.rho2.values
    quad = lambda k, a, b: g.h**2 * a @ k(d) @ b
    expected = (
        g.h * np.sum(model.diffusion.A(r1, r2))
        + 0.5 * quad(model.H1.value, r1, r1)
        + 0.5 * quad(model.H2.value, r2, r2)
        + quad(model.K1.value, r1, r2)
        + quad(model.K2.value, r2, r1)
    )
    assert e.total == pytest.approx(expected, abs=1e-10)


@given(st.floats(0.1, 5.0))
def test_cross_terms_scale_linearly(factor):
    g = Grid1D(-1.0, 1.0, 40)
    p = SpeciesPair(gaussian_density(g, -0.2, 0.2), gaussian_density(g, 0.3, 0.2))
    m = model_preset("coupled")
    e1 = relative_energy(p, p, m)
    e2 = relative_energy(p, p, m.scaled_cross(factor))
    assert e2.cross == pytest.approx(factor * e1.cross, rel=1e-12, abs=1e-15)
    assert e2.F_tilde == e1.F_tilde


def test_convolution_locations_agree(rng):
    g = Grid1D(-1.0, 1.0, 64)
    rho = random_pair(g, rng).rho1
    K = gaussian_kernel("cross_K1", -1.0, 0.5)
    x = g.centers
    brute_c = g.h * K.value(x[:, None] - x[None, :]) @ rho.values
    assert np.allclose(convolve(K, rho, "centers"), brute_c, atol=1e-13)
    xf = g.faces[1:-1]
    brute_f = g.h * K.grad(xf[:, None] - x[None, :]) @ rho.values
    assert np.allclose(convolve(K, rho, "faces"), brute_f, atol=1e-13)


@pytest.mark.parametrize("name", MODEL_PRESETS)
def test_presets_construct(name):
    m = model_preset(name)
    assert isinstance(m, ModelSpec)
    assert np.isfinite(m.laplacian_total)


def test_lipschitz_sum():
    m = model_preset("coupled")
    assert m.cross_lip_sq == pytest.approx(m.K1.lip_value**2 + m.K2.lip_value**2)
    assert replace(m, K1=gaussian_kernel("cross_K1", 0.0), K2=gaussian_kernel("cross_K2", 0.0)).cross_lip_sq == 0.0
