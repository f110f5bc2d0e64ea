from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossjko.errors import DegenerateSupport
from crossjko.grid import Grid1D, SpeciesPair, normalize
from crossjko.scenarios import gaussian_density, random_pair, uniform_density
from crossjko.transport import optimal_map, product_w2_sq, quantile, transport_cost, w2, w2_cdf, w2_squared


def _shifted_gauss(g, c, s=0.15):
    return gaussian_density(g, c, s)


def test_quantile_of_uniform():
    g = Grid1D(0.0, 1.0, 256)
    q = quantile(uniform_density(g, 0.0, 1.0), 1024)
    assert np.max(np.abs(q.values - q.levels)) <= g.h


def test_quantile_single_cell_support():
    g = Grid1D(0.0, 1.0, 50)
    v = np.zeros(50)
    v[20] = 1.0
    q = quantile(normalize(v, g), 200).values
    assert np.all((q >= g.faces[20]) & (q <= g.faces[21]))


def test_quantile_symmetry():
    g = Grid1D(-1.0, 2.0, 300)
    c = 0.5
    q = quantile(gaussian_density(g, c, 0.2), 1200).values
    assert np.max(np.abs(q + q[::-1] - 2 * c)) < 1e-6


def test_w2_identity_and_unit_shift():
    g = Grid1D(0.0, 3.0, 1024)
    mu = uniform_density(g, 0.0, 1.0)
    nu = uniform_density(g, 1.0, 2.0)
    assert w2(mu, mu) == 0.0
    assert w2(mu, nu, n_q=4096) == pytest.approx(1.0, abs=2e-3)
    assert w2(mu, nu) == pytest.approx(1.0, abs=2e-3)


def test_w2_translation():
    g = Grid1D(-2.0, 2.0, 800)
    s = 0.37
    assert w2(_shifted_gauss(g, -0.4), _shifted_gauss(g, -0.4 + s)) == pytest.approx(s, abs=2e-3)


def test_product_distance_oracles():
    g = Grid1D(-2.0, 2.0, 800)
    a = SpeciesPair(_shifted_gauss(g, -0.5), _shifted_gauss(g, 0.4))
    assert product_w2_sq(a, a) == 0.0
    b = SpeciesPair(_shifted_gauss(g, -0.2), _shifted_gauss(g, 0.4))
    assert product_w2_sq(a, b) == pytest.approx(0.09, abs=1e-3)
    c = SpeciesPair(_shifted_gauss(g, -0.2), _shifted_gauss(g, 0.7))
    assert product_w2_sq(a, c) == pytest.approx(0.18, abs=2e-3)


def test_optimal_map_oracles():
    g = Grid1D(-1.0, 3.0, 800)
    mu = uniform_density(g, 0.0, 1.0)
    sup = (g.centers > 0) & (g.centers < 1)
    assert np.max(np.abs(optimal_map(mu, mu)[sup] - g.centers[sup])) < 1e-12
    T = optimal_map(mu, uniform_density(g, 0.5, 1.5))
    assert np.max(np.abs(T[sup] - g.centers[sup] - 0.5)) <= g.h
    T = optimal_map(mu, uniform_density(g, 0.0, 2.0))
    assert np.max(np.abs(T[sup] - 2 * g.centers[sup])) <= 2 * g.h


def test_optimal_map_rejects_interior_vacuum():
    g = Grid1D(0.0, 1.0, 40)
    v = np.ones(40)
    v[20] = 0.0
    with pytest.raises(DegenerateSupport):
        optimal_map(normalize(v, g), uniform_density(g, 0.0, 1.0))


def test_map_cost_matches_distance():
    g = Grid1D(-2.0, 2.0, 1024)
    mu, nu = _shifted_gauss(g, -0.3, 0.2), _shifted_gauss(g, 0.4, 0.3)
    assert transport_cost(mu, optimal_map(mu, nu)) == pytest.approx(w2_squared(mu, nu), rel=1e-2)


def test_exact_and_quadrature_agree():
    g = Grid1D(-2.0, 2.0, 256)
    mu, nu = _shifted_gauss(g, -0.3, 0.2), _shifted_gauss(g, 0.4, 0.3)
    assert w2_squared(mu, nu, n_q=16 * 256) == pytest.approx(w2_squared(mu, nu), rel=1e-4)


def test_w2_cdf_gradient_matches_finite_differences(rng):
    g = Grid1D(-1.0, 1.0, 24)
    a = random_pair(g, rng).rho1.cdf_faces()
    b = random_pair(g, rng).rho1.cdf_faces()
    val, grad = w2_cdf(a, b, g.faces, grad=True)
    eps = 1e-7
    # away from vacuum the objective is smooth in the interior CDF values
    ks = [k for k in range(1, 24) if b[k - 1] + 1e-3 < b[k] < b[k + 1] - 1e-3]
    assert ks
    for k in ks:
        bp = b.copy()
        bp[k] += eps
        bm = b.copy()
        bm[k] -= eps
        fd = (w2_cdf(a, bp, g.faces) - w2_cdf(a, bm, g.faces)) / (2 * eps)
        assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-8)


pairs = st.integers(0, 2**31 - 1)


@given(pairs)
def test_metric_axioms(seed):
    g = Grid1D(-1.0, 1.0, 64)
    rng = np.random.default_rng(seed)
    a, b, c = (random_pair(g, rng).rho1 for _ in range(3))
    dab, dba = w2(a, b), w2(b, a)
    assert dab >= 0
    assert dab == pytest.approx(dba, abs=1e-12)
    assert w2(a, c) <= dab + w2(b, c) + 1e-9
