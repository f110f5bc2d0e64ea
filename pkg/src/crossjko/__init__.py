"""Semi-implicit JKO scheme for two-species cross-diffusion systems with nonlocal interactions in 1-D.

The main entry points are :func:`run_scheme` (variational time stepping),
:func:`fv_run` (finite-volume reference), :func:`audit_model` (structural
assumptions) and :func:`diagnose` (a-priori estimates along a trajectory).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .audit import AuditEntry, AuditReport, audit_diffusion, audit_model, audit_potential
from .diagnostics import DiagnosticEntry, DiagnosticsReport, TestFunction, diagnose
from .errors import CrossJkoError
from .fv import FvConfig, fv_run
from .grid import Density, Grid1D, SpeciesPair, density_from_function, normalize
from .jko import JkoConfig, StepRecord, Trajectory, interpolate, jko_step, run_scheme
from .kernels import BACKEND
from .model import DiffusionSpec, ModelSpec, PotentialSpec, model_preset, relative_energy
from .transport import product_w2, w2, w2_squared

__all__ = [
    "AuditEntry", "AuditReport", "BACKEND", "CrossJkoError", "Density", "DiagnosticEntry", "DiagnosticsReport",
    "DiffusionSpec", "FvConfig", "Grid1D", "JkoConfig", "ModelSpec", "PotentialSpec", "SpeciesPair", "StepRecord",
    "TestFunction", "Trajectory", "__version__", "audit_diffusion", "audit_model", "audit_potential",
    "density_from_function", "diagnose", "fv_run", "interpolate", "jko_step", "model_preset", "normalize",
    "product_w2", "relative_energy", "run_scheme", "w2", "w2_squared",
]
