from __future__ import annotations

import json

import pytest

from crossjko.cli import EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_OK, EXIT_SOLVER, main

ZERO = """\
grid: {x_min: -1.5, x_max: 1.5, n_cells: 64}
time: {tau: 0.01, horizon_T: 0.05}
model: {preset: zero}
initial: {kind: gaussian, centers: [-0.2, 0.2], widths: [0.1, 0.1]}
"""

COUNTER = """\
grid: {x_min: -1.5, x_max: 1.5, n_cells: 64}
time: {tau: 0.005, horizon_T: 0.02}
model: {preset: counterexample}
initial: {kind: bump, centers: [-0.2, 0.2], widths: [0.4, 0.4]}
"""

PME = """\
grid: {x_min: -2.5, x_max: 2.5, n_cells: 256}
time: {tau: 1e-3, horizon_T: 0.03}
model: {preset: decoupled_pme}
initial: {kind: barenblatt, t0: 0.1}
"""

ESCAPE = """\
grid: {x_min: 0.0, x_max: 1.0, n_cells: 32}
time: {tau: 0.01, horizon_T: 0.05}
model: {preset: decoupled_pme}
initial: {kind: uniform, intervals: [[0.0, 1.0], [0.0, 1.0]]}
"""


def _cfg(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _load(path):
    return json.loads(path.read_text())


def test_zero_model_run(tmp_path, capsys):
    out = tmp_path / "zero"
    assert main(["run", _cfg(tmp_path, ZERO), "-o", str(out)]) == EXIT_OK
    for f in ("config.yaml", "densities.csv", "energies.csv", "steps.csv", "diagnostics.json", "MANIFEST.json"):
        assert (out / f).exists()
    man = _load(out / "MANIFEST.json")
    assert man["complete"] and man["exit_code"] == 0
    assert set(man["files"]) == {"config.yaml", "densities.csv", "energies.csv", "steps.csv", "diagnostics.json"}
    doc = _load(out / "diagnostics.json")
    assert doc["passed"]
    assert "PASS conservation" in capsys.readouterr().out


def test_counterexample_fails_with_witness(tmp_path):
    out = tmp_path / "cex"
    assert main(["run", _cfg(tmp_path, COUNTER), "-o", str(out)]) == EXIT_DIAGNOSTIC
    doc = _load(out / "diagnostics.json")
    d3 = [e for a in doc["audit"] for e in a["entries"] if e["check"] == "D3"]
    assert len(d3) == 1 and not d3[0]["passed"]
    assert min(d3[0]["witness"]["xi1"], d3[0]["witness"]["xi2"]) < 1e-2
    assert _load(out / "MANIFEST.json")["status"] == "diagnostic_failure"


def test_audit_subcommand(tmp_path):
    assert main(["audit", _cfg(tmp_path, COUNTER), "-o", str(tmp_path / "a")]) == EXIT_DIAGNOSTIC
    assert main(["audit", _cfg(tmp_path, PME, "pme.yaml"), "-o", str(tmp_path / "b")]) == EXIT_OK
    assert _load(tmp_path / "b" / "audit.json")["passed"]


def test_config_errors(tmp_path, capsys):
    bad = ZERO.replace("model: {preset: zero}", "model:\n  diffusion: {preset: decoupled, m1: 1.0}")
    assert main(["run", _cfg(tmp_path, bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "D1" in err and "line 4" in err
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main(["diagnose", str(tmp_path / "nowhere")]) == EXIT_CONFIG


def test_solver_failure_flushes_partial_output(tmp_path):
    out = tmp_path / "esc"
    assert main(["run", _cfg(tmp_path, ESCAPE), "-o", str(out)]) == EXIT_SOLVER
    man = _load(out / "MANIFEST.json")
    assert man["complete"] is False
    assert man["status"].startswith("solver_failure")
    assert "densities.csv" in man["files"]


def test_pme_scenario_reports_oracle_and_reproduces(tmp_path):
    cfg = _cfg(tmp_path, PME)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "-o", str(a)]) == EXIT_OK
    doc = _load(a / "diagnostics.json")
    oracle = [e for e in doc["diagnostics"]["entries"] if e["name"] == "barenblatt_l1"]
    assert len(oracle) == 1 and oracle[0]["passed"]
    # rerunning from the emitted config reproduces every output bit for bit
    assert main(["run", str(a / "config.yaml"), "-o", str(b)]) == EXIT_OK
    ma, mb = _load(a / "MANIFEST.json"), _load(b / "MANIFEST.json")
    assert ma["files"] == mb["files"]
    # diagnose recomputes the same document from the stored trajectory
    before = (a / "diagnostics.json").read_bytes()
    assert main(["diagnose", str(a)]) == EXIT_OK
    assert (a / "diagnostics.json").read_bytes() == before


def test_compare_pme(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", _cfg(tmp_path, PME), "-o", str(out)]) == EXIT_OK
    doc = _load(out / "compare.json")
    assert doc["passed"]
    assert doc["final_l1"]["rho1"] <= 0.03
    assert doc["oracle_jko"]["passed"] and doc["oracle_fv"]["passed"]
    assert (out / "densities_fv.csv").exists()


def test_output_root_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CROSSJKO_OUTPUT_ROOT", str(tmp_path / "root"))
    text = ZERO + "output: {directory: rel}\n"
    assert main(["run", _cfg(tmp_path, text)]) == EXIT_OK
    assert (tmp_path / "root" / "rel" / "MANIFEST.json").exists()


def test_calibrated_constants(tmp_path):
    text = PME.replace("horizon_T: 0.03", "horizon_T: 0.04") + "diagnostics: {calibration: true}\n"
    out = tmp_path / "cal"
    code = main(["run", _cfg(tmp_path, text), "-o", str(out)])
    doc = _load(out / "diagnostics.json")
    assert "holder_c" in doc["calibration"]
    holder = [e for e in doc["diagnostics"]["entries"] if e["name"] == "holder"][0]
    assert holder["constants"]["c"] == pytest.approx(doc["calibration"]["holder_c"])
    assert code in (EXIT_OK, EXIT_DIAGNOSTIC)


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
