"""Acceptance criteria AC1 to AC10 at their stated tolerances.

Each test stores its verdict through ``record`` and the terminal summary
prints one PASS/FAIL line per criterion.  The expensive trajectories are
module fixtures shared between criteria.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from conftest import record
from crossjko.audit import audit_diffusion, audit_potential
from crossjko.diagnostics import (
    HOLDER_EXPONENT_RANGE,
    TestFunction,
    check_conservation,
    check_difference_quotient,
    check_dissipation,
    check_flow_interchange,
    check_holder,
    check_moments,
    check_scheme_inequality,
    weak_residual,
)
from crossjko.fv import fv_run
from crossjko.grid import Grid1D
from crossjko.jko import JkoConfig, run_scheme
from crossjko.model import (
    MODEL_PRESETS,
    abs_kernel,
    counterexample,
    example1,
    example2,
    gaussian_kernel,
    model_preset,
    quadratic_kernel,
)
from crossjko.scenarios import (
    barenblatt_density,
    barenblatt_pair,
    coupled_initial,
    l1_distance,
    random_pair,
    uniform_density,
)
from crossjko.transport import w2

pytestmark = pytest.mark.slow

PME_T0, PME_T = 0.1, 0.5
COUPLED_T = 0.2
PHIS = (TestFunction(-0.6, 0.8), TestFunction(0.2, 0.9, "poly_bump"), TestFunction(0.6, 1.0))


def _pme(n, tau):
    g = Grid1D(-2.5, 2.5, n)
    m = model_preset("decoupled_pme")
    t = time.perf_counter()
    jko = run_scheme(barenblatt_pair(g, PME_T0), PME_T, m, JkoConfig(tau=tau))
    fv, _ = fv_run(barenblatt_pair(g, PME_T0), PME_T, m, out_dt=tau)
    exact = barenblatt_density(g, PME_T0 + PME_T)
    return {
        "jko": jko,
        "fv": fv,
        "err_jko": max(l1_distance(jko.final[i], exact) for i in (0, 1)),
        "err_fv": max(l1_distance(fv.final[i], exact) for i in (0, 1)),
        "agree": max(l1_distance(jko.final[i], fv.final[i]) for i in (0, 1)),
        "seconds": time.perf_counter() - t,
    }


def _coupled(n, tau):
    g = Grid1D(-3.0, 3.0, n)
    return run_scheme(coupled_initial(g), COUPLED_T, model_preset("coupled"), JkoConfig(tau=tau))


@pytest.fixture(scope="module")
def pme_coarse():
    return _pme(256, 2e-3)


@pytest.fixture(scope="module")
def pme_fine():
    return _pme(512, 1e-3)


@pytest.fixture(scope="module")
def coupled_256():
    return _coupled(256, 1e-3)


@pytest.fixture(scope="module")
def coupled_256_half_tau():
    return _coupled(256, 5e-4)


@pytest.fixture(scope="module")
def coupled_512():
    return _coupled(512, 5e-4)


@pytest.fixture(scope="module")
def preset_runs():
    g = Grid1D(-3.0, 3.0, 128)
    return {name: run_scheme(coupled_initial(g), 0.02, model_preset(name), JkoConfig(tau=2e-3)) for name in MODEL_PRESETS}


def test_ac1_w2_correctness():
    t = time.perf_counter()
    g = Grid1D(0.0, 3.0, 1024)
    d = w2(uniform_density(g, 0.0, 1.0), uniform_density(g, 1.0, 2.0), n_q=4096)
    rng = np.random.default_rng(2024)
    gc = Grid1D(-1.0, 1.0, 128)
    corpus = [random_pair(gc, rng).rho1 for _ in range(50)]
    D = np.array([[w2(a, b) for b in corpus] for a in corpus])
    identity = float(np.max(np.abs(np.diag(D))))
    symmetric = float(np.max(np.abs(D - D.T)))
    positive = bool(np.all(D[~np.eye(50, dtype=bool)] > 0))
    triangle = max(D[i, k] - D[i, j] - D[j, k] for i, j, k in itertools.permutations(range(50), 3))
    secs = time.perf_counter() - t
    ok = abs(d - 1.0) <= 2e-3 and identity <= 1e-12 and symmetric <= 1e-12 and positive and triangle <= 1e-9 and secs < 5.0
    record("AC1", ok, f"W2={d:.6f} identity={identity:.1e} asym={symmetric:.1e} triangle={triangle:.1e} {secs:.2f}s")
    assert ok


def test_ac2_pme_oracle(pme_coarse, pme_fine):
    r1 = pme_coarse["err_jko"] / pme_fine["err_jko"]
    r2 = pme_coarse["err_fv"] / pme_fine["err_fv"]
    f = pme_fine
    ok = f["err_jko"] <= 0.05 and f["err_fv"] <= 0.05 and f["agree"] <= 0.03 and r1 >= 1.5 and r2 >= 1.5 and f["seconds"] < 300
    record(
        "AC2", ok,
        f"L1 jko={f['err_jko']:.2e} fv={f['err_fv']:.2e} agree={f['agree']:.2e} "
        f"halving ratio jko={r1:.2f} fv={r2:.2f} {f['seconds']:.0f}s",
    )
    assert ok


def test_ac3_one_step_inequality(preset_runs, coupled_256, coupled_512, pme_fine):
    runs = {**preset_runs, "coupled_256": coupled_256, "coupled_512": coupled_512, "pme_512": pme_fine["jko"]}
    entries = {k: check_scheme_inequality(tr) for k, tr in runs.items()}
    worst = max(entries, key=lambda k: entries[k].worst_slack)
    ok = all(e.passed and e.constants.get("fraction_holding", 1.0) == 1.0 for e in entries.values())
    record("AC3", ok, f"{len(runs)} runs, worst slack {entries[worst].worst_slack:.2e} ({worst})")
    assert ok


def test_ac4_dissipation(preset_runs, coupled_256, coupled_512, pme_fine):
    runs = {**preset_runs, "coupled_256": coupled_256, "coupled_512": coupled_512, "pme_512": pme_fine["jko"]}
    entries = {k: check_dissipation(tr, tr.model) for k, tr in runs.items()}
    worst = max(entries, key=lambda k: entries[k].worst_slack)
    ok = all(e.passed for e in entries.values())
    record("AC4", ok, f"{len(runs)} runs, worst slack {entries[worst].worst_slack:.2e} ({worst})")
    assert ok


def test_ac5_holder(coupled_256):
    e = check_holder(coupled_256)
    lo, hi = HOLDER_EXPONENT_RANGE
    ok = e.passed and lo <= e.constants["exponent"] <= hi
    record("AC5", ok, f"exponent={e.constants['exponent']:.3f} c={e.constants['c']:.3g} worst={e.worst_slack:.2e}")
    assert ok


def test_ac6_flow_interchange(coupled_256, coupled_256_half_tau):
    m = model_preset("coupled")
    e = check_flow_interchange(coupled_256, m)
    e_half = check_flow_interchange(coupled_256_half_tau, m)
    ratio = e.constants["accumulated_gradient"] / e_half.constants["accumulated_gradient"]
    per_step = max(e.constants["worst_iii"], e.constants["worst_iv"])
    ok = per_step <= 1e-3 and 0.5 <= ratio <= 2.0
    record("AC6", ok, f"worst per-step relative slack {per_step:.2e}, accumulated gradient ratio tau/(tau/2) = {ratio:.3f}")
    assert ok


def test_ac7_weak_residual(coupled_256, coupled_512):
    m = model_preset("coupled")
    ratios = []
    for sp in (1, 2):
        for phi in PHIS:
            coarse = weak_residual(coupled_256, m, phi, sp, (0.0, COUPLED_T))
            fine = weak_residual(coupled_512, m, phi, sp, (0.0, COUPLED_T))
            ratios.append(coarse / fine)
    ok = min(ratios) >= 1.5
    record("AC7", ok, "ratios " + " ".join(f"{r:.2f}" for r in ratios))
    assert ok


def test_ac8_auditor_golden_cases():
    checks = {
        "example1": audit_diffusion(example1()).passed,
        "example2": audit_diffusion(example2()).passed,
    }
    ce = audit_diffusion(counterexample()).entry("D3")
    checks["counterexample_D3"] = (not ce.passed) and min(ce.witness["xi1"], ce.witness["xi2"]) < 1e-2
    checks["abs_HK2"] = not audit_potential(abs_kernel("self_H1", 1.0)).entry("HK2").passed
    q = audit_potential(quadratic_kernel("self_H1", 1.0))
    checks["quadratic_H1_HK2"] = q.entry("H1").passed and q.entry("HK2").passed
    gk = audit_potential(gaussian_kernel("cross_K1", -1.0, 1.0))
    lip = gk.entry("K1_value").value
    checks["gaussian_K1"] = gk.passed and abs(lip - np.sqrt(2 / np.e)) <= 1e-6
    ok = all(checks.values())
    record("AC8", ok, " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()) + f" Lip={lip:.9f}")
    assert ok, checks


def test_ac9_difference_quotient():
    g = Grid1D(-1.5, 1.5, 2**15)
    f = TestFunction(0.0, 1.2).value(g.centers)
    e = check_difference_quotient(f, g, TestFunction(0.1, 0.8))
    ratios = e.constants["ratios_per_halving"]
    ok = e.passed and min(ratios) >= 1.8
    record("AC9", ok, "ratios " + " ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_ac10_conservation(preset_runs, coupled_256, coupled_256_half_tau, coupled_512, pme_coarse, pme_fine):
    runs = {
        **preset_runs,
        "coupled_256": coupled_256,
        "coupled_256_half_tau": coupled_256_half_tau,
        "coupled_512": coupled_512,
        "pme_256_jko": pme_coarse["jko"],
        "pme_256_fv": pme_coarse["fv"],
        "pme_512_jko": pme_fine["jko"],
        "pme_512_fv": pme_fine["fv"],
    }
    cons = {k: check_conservation(tr) for k, tr in runs.items()}
    mom = {k: check_moments(tr) for k, tr in runs.items()}
    mass = max(c.constants["mass_error"] for c in cons.values())
    neg = sum(c.constants["negative_values"] for c in cons.values())
    failed = [k for k in runs if not (cons[k].passed and mom[k].passed)]
    ok = not failed
    record("AC10", ok, f"{len(runs)} runs, max mass error {mass:.1e}, negatives {neg}, failing {failed}")
    assert ok
