from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crossjko.errors import ImageEscapesGrid, NegativeEntry, NonMonotoneMap, ZeroMass
from crossjko.grid import (
    Density,
    Grid1D,
    SpeciesPair,
    boundary_mass,
    entropy,
    lp_norm_power,
    normalize,
    pushforward,
    second_moment,
)
from crossjko.scenarios import uniform_density


def test_grid_geometry():
    g = Grid1D(-1.0, 1.0, 200)
    assert g.h == pytest.approx(0.01, abs=1e-15)
    d = np.diff(g.centers)
    assert np.all(d > 0)
    assert np.max(np.abs(d - g.h)) < 1e-14
    assert g.faces[0] == -1.0 and g.faces[-1] == 1.0
    assert g.refine().n_cells == 400


@pytest.mark.parametrize("args", [(0.0, 1.0, 7), (1.0, 1.0, 16), (2.0, 1.0, 16)])
def test_grid_rejects_bad_arguments(args):
    with pytest.raises(ValueError):
        Grid1D(*args)


def test_normalize_constant_vectors():
    g = Grid1D(0.0, 1.0, 100)
    assert np.allclose(normalize(np.ones(100), g).values, 1.0, atol=1e-14)
    assert np.allclose(normalize(5 * np.ones(100), g).values, 1.0, atol=1e-14)


def test_normalize_triangle_mass():
    g = Grid1D(-1.0, 1.0, 333)
    rho = normalize(1.0 - np.abs(g.centers), g)
    assert abs(g.h * rho.values.sum() - 1.0) <= 1e-12


def test_normalize_errors():
    g = Grid1D(0.0, 1.0, 10)
    with pytest.raises(ZeroMass):
        normalize(np.zeros(10), g)
    raw = np.ones(10)
    raw[3] = -1e-3
    with pytest.raises(NegativeEntry):
        normalize(raw, g)


def test_density_validates_mass():
    g = Grid1D(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        Density(g, np.full(10, 1.1))


@given(st.lists(st.floats(0.0, 1e3), min_size=8, max_size=64).filter(lambda v: sum(v) > 1e-6))
def test_normalize_always_unit_mass(raw):
    g = Grid1D(-2.0, 3.0, len(raw))
    rho = normalize(raw, g)
    assert abs(rho.mass - 1.0) <= 1e-12
    assert np.all(rho.values >= 0)


def test_second_moment_oracles():
    g = Grid1D(-1.0, 1.0, 1024)
    assert second_moment(uniform_density(g, -1.0, 1.0)) == pytest.approx(1.0 / 3.0, abs=1e-3)
    g01 = Grid1D(0.0, 1.0, 1024)
    assert second_moment(uniform_density(g01, 0.0, 1.0)) == pytest.approx(1.0 / 3.0, abs=1e-3)
    # point mass in the cell holding 0
    g = Grid1D(-1.0, 1.0, 101)
    v = np.zeros(101)
    v[50] = 1.0
    rho = normalize(v, g)
    assert second_moment(rho) <= g.h**2 / 4


def test_pushforward_identity_and_shift():
    g = Grid1D(-2.0, 2.0, 400)
    rho = normalize(np.exp(-(g.centers**2) / 0.1), g)
    assert pushforward(rho, g.centers) == rho
    k = 17
    # the map is checked everywhere, so clamp it where rho carries no mass
    out = pushforward(rho, np.minimum(g.centers + k * g.h, g.centers[-1]))
    assert np.allclose(out.values[k:], rho.values[:-k], atol=1e-10)


def test_pushforward_contraction_change_of_variables():
    g = Grid1D(-2.0, 2.0, 800)
    c = 0.25
    rho = uniform_density(g, -0.75, 1.25)
    out = pushforward(rho, (g.centers - c) / 2 + c)
    expected = uniform_density(g, -0.25, 0.75)
    assert np.max(out.values) == pytest.approx(2 * np.max(rho.values), rel=1e-9)
    assert g.h * np.sum(np.abs(out.values - expected.values)) < 1e-9


def test_pushforward_errors():
    g = Grid1D(0.0, 1.0, 20)
    rho = uniform_density(g, 0.2, 0.8)
    with pytest.raises(NonMonotoneMap):
        pushforward(rho, g.centers[::-1])
    with pytest.raises(ImageEscapesGrid):
        pushforward(rho, g.centers + 0.5)


def test_entropy_oracles():
    g = Grid1D(0.0, 1.0, 64)
    u = uniform_density(g, 0.0, 1.0)
    assert entropy(SpeciesPair(u, u)) == pytest.approx(0.0, abs=1e-14)
    g2 = Grid1D(0.0, 2.0, 64)
    u2 = uniform_density(g2, 0.0, 2.0)
    assert entropy(SpeciesPair(u2, u2)) == pytest.approx(2 * np.log(0.5), abs=1e-6)
    # vacuum cells contribute nothing
    half = uniform_density(g2, 0.0, 1.0)
    assert entropy(SpeciesPair(half, half)) == pytest.approx(0.0, abs=1e-14)


def test_lp_norm_and_boundary_mass():
    g = Grid1D(0.0, 1.0, 100)
    u = uniform_density(g, 0.0, 1.0)
    assert lp_norm_power(u, 2.0) == pytest.approx(1.0, abs=1e-12)
    assert boundary_mass(u, 5) == pytest.approx(0.1, abs=1e-12)


def test_species_pair_requires_same_grid():
    from crossjko.errors import GridMismatch

    a = uniform_density(Grid1D(0.0, 1.0, 10), 0.0, 1.0)
    b = uniform_density(Grid1D(0.0, 1.0, 20), 0.0, 1.0)
    with pytest.raises(GridMismatch):
        SpeciesPair(a, b)
