"""Backend selection for the hot kernels.

The compiled extension ``crossjko._ckernels`` is used when it was built and
imports cleanly; otherwise the NumPy fallback in ``crossjko._kernels_py`` is
used.  Setting ``CROSSJKO_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

_NAMES = ("pav", "cdf_at", "cdf_adjoint", "interval_cost", "upwind_flux", "toeplitz_conv")


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _ckernels


def get_backend(name: str) -> ModuleType:
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return mod
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _load_compiled() is not None


if os.environ.get("CROSSJKO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    _impl = _load_compiled() or _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

pav = _impl.pav
cdf_at = _impl.cdf_at
cdf_adjoint = _impl.cdf_adjoint
interval_cost = _impl.interval_cost
upwind_flux = _impl.upwind_flux
# np.convolve beats the compiled direct double sum at every size measured
# by benchmarks/bench_kernels.py, so the fallback is used under both backends
toeplitz_conv = _kernels_py.toeplitz_conv

__all__ = ["BACKEND", "get_backend", "compiled_available", *_NAMES]
