from __future__ import annotations

import numpy as np
import pytest

from crossjko.audit import audit_diffusion, audit_model, audit_potential
from crossjko.model import (
    DiffusionSpec,
    PotentialSpec,
    abs_kernel,
    counterexample,
    decoupled,
    example1,
    example2,
    gaussian_kernel,
    model_preset,
    quadratic_form,
    quadratic_kernel,
)


def test_decoupled_passes_with_certified_constant():
    rep = audit_diffusion(decoupled())
    assert rep.passed, rep.failures()
    assert rep.entry("D3").value == pytest.approx(2.0, rel=1e-9)


@pytest.mark.parametrize("spec", [example1(), example2(), quadratic_form(2.0, 0.5, 1.0)], ids=lambda s: s.name)
def test_positive_definite_families_pass(spec):
    rep = audit_diffusion(spec)
    assert rep.passed, rep.failures()


def test_counterexample_fails_near_vacuum_axis():
    rep = audit_diffusion(counterexample())
    assert not rep.passed
    e = rep.entry("D3")
    assert not e.passed
    w = e.witness
    assert min(w["xi1"], w["xi2"]) < 1e-2
    v = np.asarray(w["V"])
    # the degenerate direction of the Hessian of (x + y)**2
    assert abs(v[0] + v[1]) < 1e-8


def test_zero_diffusion_is_vacuous():
    rep = audit_diffusion(DiffusionSpec(name="zero"))
    assert rep.passed
    assert "vacuous" in rep.entry("D3").detail


def test_quadratic_self_kernel_passes():
    rep = audit_potential(quadratic_kernel("self_H1", 1.0))
    assert rep.passed, rep.failures()
    assert rep.entry("H1").passed and rep.entry("HK2").passed


def test_gaussian_cross_kernel_lipschitz():
    rep = audit_potential(gaussian_kernel("cross_K1", -1.0, 1.0))
    assert rep.passed, rep.failures()
    assert rep.entry("K1_value").value == pytest.approx(np.sqrt(2 / np.e), abs=1e-6)


def test_abs_kernel_fails_laplacian_bound():
    rep = audit_potential(abs_kernel("self_H1", 1.0))
    assert rep.entry("even").passed
    assert not rep.entry("HK2").passed


def test_declared_constant_too_small_fails():
    K = PotentialSpec("cross_K1", "gaussian", -1.0, 1.0, lip_value=0.5)
    assert not audit_potential(K).entry("K1_value").passed


def test_model_audit_covers_every_component():
    reps = audit_model(model_preset("coupled"))
    assert len(reps) == 5
    assert all(r.passed for r in reps), [r.failures() for r in reps]
    for r in reps:
        d = r.to_dict()
        assert set(d) == {"subject", "passed", "entries"}
