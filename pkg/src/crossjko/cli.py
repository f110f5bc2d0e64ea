"""Command-line entry points: ``run``, ``audit``, ``compare`` and ``diagnose``.

Exit codes: 0 when every audit and diagnostic passes, 2 when any fails,
3 on a configuration error or missing input, 4 when a solver does not
converge.  Solver failures still flush the partial trajectory together
with a manifest marked incomplete.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as cio
from .audit import audit_model
from .config import RunConfig, build_grid, build_initial, build_model, load_config, serialize_config
from .diagnostics import DiagnosticEntry, DiagnosticsReport, check_entropy_bounds, check_holder, diagnose
from .errors import BoundaryEscape, ConfigError, InnerSolverStalled, NegativityClipExceeded, StabilityViolation
from .fv import FvConfig, fv_run
from .grid import Grid1D
from .jko import Trajectory, run_scheme
from .model import ModelSpec, decoupled
from .scenarios import barenblatt_density, l1_distance

EXIT_OK = 0
EXIT_DIAGNOSTIC = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4

TRAJECTORY_FILES = ("config.yaml", "densities.csv", "energies.csv", "steps.csv")

log = logging.getLogger("crossjko")


class _Abort(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ helpers


def _load(path) -> RunConfig:
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise _Abort(EXIT_CONFIG, f"config not found: {exc.filename or path}") from exc
    except ConfigError as exc:
        raise _Abort(EXIT_CONFIG, f"config error: {exc}") from exc


def _is_pme(model: ModelSpec) -> bool:
    pots = (model.H1, model.H2, model.K1, model.K2)
    return all(p.is_zero for p in pots) and model.diffusion.terms == decoupled().terms


def oracle_entry(traj: Trajectory, cfg: RunConfig) -> DiagnosticEntry | None:
    """L1 distance of the final snapshot to the closed-form Barenblatt profile.

    Enabled by ``oracle: barenblatt``, or by ``auto`` when the run starts
    from Barenblatt data under the decoupled porous-medium model.
    """
    mode = cfg.diagnostics.oracle
    if mode == "none":
        return None
    if mode == "auto" and not (cfg.initial.kind == "barenblatt" and _is_pme(traj.model)):
        return None
    t_end = cfg.initial.t0 + traj.n_steps * traj.tau
    c1, c2 = cfg.initial.centers
    final = traj.final
    errs = [l1_distance(final.rho1, barenblatt_density(traj.grid, t_end, c1)), l1_distance(final.rho2, barenblatt_density(traj.grid, t_end, c2))]
    tol = cfg.diagnostics.oracle_tol
    worst = max(errs)
    return DiagnosticEntry(
        "barenblatt_l1",
        bool(worst <= tol),
        float(worst - tol),
        {"species": int(np.argmax(errs)) + 1, "t": float(t_end)},
        {"l1_rho1": errs[0], "l1_rho2": errs[1], "tol": tol},
    )


def calibrate(cfg: RunConfig, model: ModelSpec) -> dict:
    """Fit the Hölder and entropy constants on a run at half resolution and twice the step."""
    g = build_grid(cfg)
    coarse = Grid1D(g.x_min, g.x_max, max(g.n_cells // 2, 8))
    jc = cfg.jko
    from dataclasses import replace

    traj = run_scheme(build_initial(cfg, coarse), cfg.time.horizon_T, model, replace(jc, tau=2 * jc.tau))
    out = {"n_cells": coarse.n_cells, "tau": 2 * jc.tau}
    if traj.n_steps >= 10:
        h = check_holder(traj, n_pairs=cfg.diagnostics.holder_pairs)
        if h.constants.get("c") is not None:
            out["holder_c"] = float(h.constants["c"])
    e = check_entropy_bounds(traj, model)
    fitted = e.constants["C_fitted"]
    if fitted > 0:
        out["entropy_C"] = float(1.5 * fitted)
    return out


def build_report(traj: Trajectory, cfg: RunConfig, model: ModelSpec | None = None) -> dict:
    """Audit reports, trajectory diagnostics and the oracle comparison as one document."""
    model = traj.model if model is None else model
    dc = cfg.diagnostics
    audits = audit_model(model)
    consts = calibrate(cfg, model) if dc.calibration else {}
    diag = diagnose(
        traj, model, checks=dc.checks, s_max=dc.s_max, n_heat_steps=dc.n_heat_steps, holder_pairs=dc.holder_pairs,
        holder_c=consts.get("holder_c"), entropy_C=consts.get("entropy_C"),
    )
    oracle = oracle_entry(traj, cfg)
    if oracle is not None:
        diag.entries.append(oracle)
    passed = all(a.passed for a in audits) and diag.passed
    doc = {
        "passed": bool(passed),
        "audit": [a.to_dict() for a in audits],
        "diagnostics": diag.to_dict(),
    }
    if consts:
        doc["calibration"] = consts
    return doc


def _summarize(doc: dict) -> list[str]:
    lines = []
    for a in doc.get("audit", []):
        for e in a["entries"]:
            if not e["passed"]:
                lines.append(f"AUDIT FAIL {a['subject']} {e['check']}: {e['detail']} witness={e['witness']}")
    for e in doc.get("diagnostics", {}).get("entries", []):
        lines.append(f"{'PASS' if e['passed'] else 'FAIL'} {e['name']} worst_slack={e['worst_slack']}")
    return lines


def _write_trajectory(traj: Trajectory, cfg: RunConfig, out: Path) -> list[str]:
    files = ["config.yaml"]
    (out / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")
    if "csv" in cfg.output.formats:
        cio.write_densities(traj, out / "densities.csv")
        cio.write_energies(traj, out / "energies.csv")
        cio.write_steps(traj, out / "steps.csv")
        files += ["densities.csv", "energies.csv", "steps.csv"]
    return files


def _output_dir(cfg: RunConfig, override: str | None) -> Path:
    out = cio.resolve_output_dir(override or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_jko(cfg: RunConfig, model: ModelSpec, out: Path) -> Trajectory:
    try:
        return run_scheme(build_initial(cfg), cfg.time.horizon_T, model, cfg.jko, progress=_progress)
    except (InnerSolverStalled, BoundaryEscape) as exc:
        partial = getattr(exc, "partial", None)
        files = _write_trajectory(partial, cfg, out) if partial is not None else []
        cio.write_manifest(out, files, False, f"solver_failure: {type(exc).__name__}", EXIT_SOLVER, {"message": str(exc)})
        raise _Abort(EXIT_SOLVER, f"solver failure at step {getattr(exc, 'step_index', None)}: {exc}") from exc


def _progress(k, rec):
    log.debug("step %d w2=%.3e iters=%d sweeps=%d converged=%s", k, rec.w2_sq, rec.inner_iters, rec.sweeps, rec.converged)


def _finish(out: Path, files: list[str], code: int, status: str, extra: dict | None = None) -> int:
    cio.write_manifest(out, files, True, status, code, extra)
    return code


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    cfg = _load(args.config)
    model = build_model(cfg)
    out = _output_dir(cfg, args.output)
    traj = _run_jko(cfg, model, out)
    files = _write_trajectory(traj, cfg, out)
    doc = build_report(traj, cfg, model)
    if "json" in cfg.output.formats:
        cio.write_json(doc, out / "diagnostics.json")
        files.append("diagnostics.json")
    for line in _summarize(doc):
        print(line)
    stalled = [r.index for r in traj.records if not r.converged]
    if stalled:
        print(f"inner solver did not converge at steps {stalled[:10]}", file=sys.stderr)
        return _finish(out, files, EXIT_SOLVER, "not_converged", {"unconverged_steps": stalled})
    code = EXIT_OK if doc["passed"] else EXIT_DIAGNOSTIC
    return _finish(out, files, code, "passed" if code == EXIT_OK else "diagnostic_failure")


def cmd_audit(args) -> int:
    cfg = _load(args.config)
    model = build_model(cfg)
    reports = audit_model(model)
    doc = {"passed": all(r.passed for r in reports), "audit": [r.to_dict() for r in reports]}
    for line in _summarize(doc):
        print(line)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.subject}")
    if args.output or "json" in cfg.output.formats:
        out = _output_dir(cfg, args.output)
        cio.write_json(doc, out / "audit.json")
    return EXIT_OK if doc["passed"] else EXIT_DIAGNOSTIC


def cmd_compare(args) -> int:
    cfg = _load(args.config)
    model = build_model(cfg)
    out = _output_dir(cfg, args.output)
    traj = _run_jko(cfg, model, out)
    files = _write_trajectory(traj, cfg, out)
    fb = cfg.fv
    try:
        fv, stats = fv_run(build_initial(cfg), cfg.time.horizon_T, model, FvConfig(fb.dt_fv, fb.limiter, fb.safety), out_dt=cfg.time.tau)
    except (StabilityViolation, NegativityClipExceeded) as exc:
        cio.write_manifest(out, files, False, f"solver_failure: {type(exc).__name__}", EXIT_SOLVER, {"message": str(exc)})
        print(f"finite-volume failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    n = min(len(fv.snapshots), len(traj.snapshots))
    fv = Trajectory(fv.grid, fv.model, fv.config, fv.snapshots[:n], (), label="fv")
    if "csv" in cfg.output.formats:
        cio.write_densities(fv, out / "densities_fv.csv")
        files.append("densities_fv.csv")
    l1 = np.array([[l1_distance(a.rho1, b.rho1), l1_distance(a.rho2, b.rho2)] for a, b in zip(traj.snapshots[:n], fv.snapshots)])
    final = l1[-1]
    passed = bool(np.all(final <= fb.l1_tol))
    doc = {
        "passed": passed,
        "l1_tol": fb.l1_tol,
        "final_l1": {"rho1": float(final[0]), "rho2": float(final[1])},
        "max_l1": {"rho1": float(l1[:, 0].max()), "rho2": float(l1[:, 1].max())},
        "fv": {"steps": stats.steps, "dt_min": float(stats.dt_min), "clipped_mass": float(stats.clipped_mass), "moment_residual": float(stats.moment_residual)},
    }
    oracle = oracle_entry(traj, cfg)
    if oracle is not None:
        doc["oracle_jko"] = oracle.to_dict()
        fo = oracle_entry(fv, cfg)
        doc["oracle_fv"] = fo.to_dict()
        doc["passed"] = passed = passed and oracle.passed and fo.passed
    if "json" in cfg.output.formats:
        cio.write_json(doc, out / "compare.json")
        files.append("compare.json")
    print(f"{'PASS' if passed else 'FAIL'} jko_vs_fv final L1 rho1={final[0]:.3e} rho2={final[1]:.3e} tol={fb.l1_tol}")
    if any(not r.converged for r in traj.records):
        return _finish(out, files, EXIT_SOLVER, "not_converged")
    code = EXIT_OK if passed else EXIT_DIAGNOSTIC
    return _finish(out, files, code, "passed" if passed else "diagnostic_failure")


def cmd_diagnose(args) -> int:
    d = Path(args.directory)
    if not (d / "config.yaml").exists() or not (d / "densities.csv").exists():
        raise _Abort(EXIT_CONFIG, f"{d} does not hold a trajectory (config.yaml and densities.csv are required)")
    try:
        traj, cfg = cio.read_trajectory(d)
    except ConfigError as exc:
        raise _Abort(EXIT_CONFIG, f"config error: {exc}") from exc
    doc = build_report(traj, cfg)
    cio.write_json(doc, d / "diagnostics.json")
    for line in _summarize(doc):
        print(line)
    return EXIT_OK if doc["passed"] else EXIT_DIAGNOSTIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossjko", description="Semi-implicit JKO scheme for two-species cross-diffusion systems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every step")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("run", cmd_run, "run the scheme and write trajectory, energies and diagnostics"),
        ("audit", cmd_audit, "audit the model hypotheses only"),
        ("compare", cmd_compare, "run the scheme and the finite-volume reference and compare them"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="YAML configuration file")
        sp.add_argument("-o", "--output", help="output directory (overrides the config)")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("diagnose", help="recompute diagnostics for a stored trajectory")
    sp.add_argument("directory", help="directory written by 'run'")
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except _Abort as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
