"""Persistence of trajectories, energy series, step records and reports.

Every float is written with 17 significant digits so that reading a file
back reproduces the binary values exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .grid import Density, SpeciesPair, entropy, second_moment
from .jko import StepRecord, Trajectory
from .model import EnergyBreakdown, relative_energy

FLOAT_FMT = "%.17g"
OUTPUT_ROOT_ENV = "CROSSJKO_OUTPUT_ROOT"
ENERGY_PARTS = ("diffusion", "self1", "self2", "cross1", "cross2")

DENSITY_COLUMNS = ("t", "x", "rho1", "rho2")
ENERGY_COLUMNS = ("t", "F_tilde", "diffusion", "self1", "self2", "cross1", "cross2", "entropy", "m2_total", "w2_step_sq")
STEP_COLUMNS = (
    "index", "t", "w2_sq", "w2_sq_1", "w2_sq_2", "inner_iters", "sweeps", "converged", "stationarity",
    *(f"prev_{p}" for p in ENERGY_PARTS), *(f"new_{p}" for p in ENERGY_PARTS), "scheme_slack",
)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FMT % float(v)


def resolve_output_dir(directory: str | os.PathLike) -> Path:
    """Relative directories resolve against ``$CROSSJKO_OUTPUT_ROOT`` when it is set."""
    p = Path(directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_densities(traj: Trajectory, path: Path):
    x = traj.grid.centers
    times = traj.times

    def rows():
        for t, p in zip(times, traj.snapshots):
            for xi, a, b in zip(x, p.rho1.values, p.rho2.values):
                yield (t, xi, a, b)

    _write_rows(path, DENSITY_COLUMNS, rows())


def energy_rows(traj: Trajectory):
    """One row per snapshot; the cross terms of snapshot ``n`` are frozen at ``n - 1``."""
    model = traj.model
    snaps = traj.snapshots
    out = []
    for k, (t, p) in enumerate(zip(traj.times, snaps)):
        e = relative_energy(p, snaps[max(k - 1, 0)], model)
        if k == 0:
            w = 0.0
        elif traj.records:
            w = traj.records[k - 1].w2_sq
        else:
            from .transport import product_w2_sq

            w = product_w2_sq(snaps[k - 1], p)
        m2 = second_moment(p.rho1) + second_moment(p.rho2)
        out.append((t, e.F_tilde, e.diffusion, e.self1, e.self2, e.cross1, e.cross2, entropy(p), m2, w))
    return out


def write_energies(traj: Trajectory, path: Path):
    _write_rows(path, ENERGY_COLUMNS, energy_rows(traj))


def write_steps(traj: Trajectory, path: Path):
    tau = traj.tau

    def rows():
        for r in traj.records:
            yield (
                r.index, (r.index + 1) * tau, r.w2_sq, *r.w2_sq_species, r.inner_iters, r.sweeps, r.converged, r.stationarity,
                *(getattr(r.energy_prev, p) for p in ENERGY_PARTS), *(getattr(r.energy_new, p) for p in ENERGY_PARTS), r.scheme_slack(tau),
            )

    _write_rows(path, STEP_COLUMNS, rows())


def write_json(obj, path: Path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory: Path, files, complete: bool, status: str, exit_code: int, extra: dict | None = None):
    """``MANIFEST.json``: output checksums and completeness, without timestamps so reruns match."""
    from . import __version__, kernels

    man = {
        "complete": bool(complete),
        "status": status,
        "exit_code": int(exit_code),
        "version": __version__,
        "backend": kernels.BACKEND,
        "config": "config.yaml",
        "files": {name: sha256(directory / name) for name in sorted(files) if (directory / name).exists()},
    }
    if extra:
        man.update(extra)
    write_json(man, directory / "MANIFEST.json")
    return man


# ------------------------------------------------------------------ reading


def read_densities(path: Path, grid) -> list[SpeciesPair]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = grid.n_cells
    if data.shape[0] % n:
        raise ValueError(f"{path}: row count {data.shape[0]} is not a multiple of {n}")
    snaps = []
    for k in range(data.shape[0] // n):
        block = data[k * n : (k + 1) * n]
        snaps.append(SpeciesPair(Density(grid, block[:, 2].copy()), Density(grid, block[:, 3].copy())))
    return snaps


def read_steps(path: Path) -> list[StepRecord]:
    recs = []
    with open(path, encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            prev = EnergyBreakdown(*(float(row[f"prev_{p}"]) for p in ENERGY_PARTS))
            new = EnergyBreakdown(*(float(row[f"new_{p}"]) for p in ENERGY_PARTS))
            recs.append(
                StepRecord(
                    int(row["index"]), float(row["w2_sq"]), (float(row["w2_sq_1"]), float(row["w2_sq_2"])), prev, new,
                    int(row["inner_iters"]), int(row["sweeps"]), row["converged"] == "1", float(row["stationarity"]),
                )
            )
    return recs


def read_trajectory(directory) -> tuple[Trajectory, object]:
    """Rebuild the trajectory and its configuration from an output directory."""
    from .config import build_grid, build_model, load_config

    d = Path(directory)
    cfg = load_config(d / "config.yaml")
    grid = build_grid(cfg)
    model = build_model(cfg)
    snaps = read_densities(d / "densities.csv", grid)
    steps = d / "steps.csv"
    recs = read_steps(steps) if steps.exists() else []
    traj = Trajectory(grid, model, cfg.jko, tuple(snaps), tuple(recs))
    return traj, cfg
