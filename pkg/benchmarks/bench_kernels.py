"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 256 1024 4096] [--repeat 20]

Prints one row per kernel and size with the best-of-``repeat`` wall time of
each backend, their ratio, and the largest absolute disagreement.  A final
row times a full JKO step with each backend selected.
"""

from __future__ import annotations

import argparse
import importlib
import os
import subprocess
import sys
import timeit

import numpy as np

from crossjko.kernels import compiled_available, get_backend


def _inputs(n: int, rng: np.random.Generator) -> dict:
    nodes = np.cumsum(rng.uniform(0.5, 1.5, n + 1))
    nodes = (nodes - nodes[0]) / (nodes[-1] - nodes[0])
    levels = np.concatenate([[0.0], np.cumsum(rng.uniform(size=n))])
    levels /= levels[-1]
    x = np.linspace(-0.1, 1.1, n + 1)
    idx = np.searchsorted(nodes, x, side="right") - 1
    rho = rng.uniform(size=n)
    return {
        "pav": (rng.normal(size=n) + np.linspace(0, 3, n), rng.uniform(0.1, 1.0, n)),
        "cdf_at": (nodes, levels, x),
        "cdf_adjoint": (nodes, levels, x, idx.astype(np.int64), rng.normal(size=n + 1)),
        "interval_cost": (nodes, np.linspace(0, 1, n + 1), rng.uniform(size=n) / n),
        "upwind_flux": (rho, rng.normal(size=n - 1)),
        "toeplitz_conv": (np.exp(-np.linspace(-1, 1, 2 * n - 1) ** 2), rho),
    }


def _first(out):
    if isinstance(out, tuple):
        out = out[0] if np.ndim(out[0]) else out[1]
    return np.asarray(out, dtype=float)


def bench(sizes, repeat: int, seed: int = 0):
    py = get_backend("python")
    cc = get_backend("compiled")
    rng = np.random.default_rng(seed)
    print(f"{'kernel':<15}{'n':>7}{'python [ms]':>14}{'compiled [ms]':>15}{'speedup':>9}{'max |diff|':>12}")
    for n in sizes:
        for name, args in _inputs(n, rng).items():
            fp, fc = getattr(py, name), getattr(cc, name)
            tp = min(timeit.repeat(lambda: fp(*args), number=1, repeat=repeat))
            tc = min(timeit.repeat(lambda: fc(*args), number=1, repeat=repeat))
            diff = float(np.max(np.abs(_first(fp(*args)) - _first(fc(*args)))))
            print(f"{name:<15}{n:>7}{tp * 1e3:>14.4f}{tc * 1e3:>15.4f}{tp / tc:>9.1f}{diff:>12.2e}")


_STEP_SNIPPET = """
import time
from crossjko import kernels
from crossjko.grid import Grid1D
from crossjko.jko import JkoConfig, jko_step
from crossjko.model import model_preset
from crossjko.scenarios import coupled_initial
g = Grid1D(-2.0, 2.0, {n})
ini = coupled_initial(g)
model = model_preset("coupled")
cfg = JkoConfig(tau=2e-3)
jko_step(ini, model, cfg)
t0 = time.perf_counter()
for _ in range(3):
    jko_step(ini, model, cfg)
print(kernels.BACKEND, (time.perf_counter() - t0) / 3)
"""


def bench_step(n: int):
    """A full coupled step, each backend in a fresh interpreter so the import-time switch applies."""
    for force in ("1", "0"):
        env = dict(os.environ, CROSSJKO_PURE_PYTHON=force)
        out = subprocess.run([sys.executable, "-c", _STEP_SNIPPET.format(n=n)], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"jko_step n={n:<5} backend={backend:<9} {float(secs) * 1e3:10.1f} ms")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--step-n", type=int, default=256)
    args = ap.parse_args(argv)
    if not compiled_available():
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    importlib.import_module("crossjko")
    bench(args.sizes, args.repeat)
    bench_step(args.step_n)


if __name__ == "__main__":
    main()
