"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CrossJkoError(Exception):
    """Base class for all package errors."""


class ZeroMass(CrossJkoError, ValueError):
    pass


class NegativeEntry(CrossJkoError, ValueError):
    pass


class NonMonotoneMap(CrossJkoError, ValueError):
    pass


class ImageEscapesGrid(CrossJkoError, ValueError):
    pass


class DegenerateSupport(CrossJkoError, ValueError):
    pass


class KindMismatch(CrossJkoError, ValueError):
    pass


class GridMismatch(CrossJkoError, ValueError):
    pass


class InnerSolverStalled(CrossJkoError, RuntimeError):
    """No decrease of the step functional was achievable at the minimum step size."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class BoundaryEscape(CrossJkoError, RuntimeError):
    """Mass came within the boundary margin of the computational interval."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class OutOfRange(CrossJkoError, ValueError):
    pass


class TooFewSteps(CrossJkoError, ValueError):
    pass


class HeatStepUnstable(CrossJkoError, RuntimeError):
    pass


class UnsupportedWindow(CrossJkoError, ValueError):
    pass


class NonMonotonePerturbation(CrossJkoError, ValueError):
    pass


class StabilityViolation(CrossJkoError, RuntimeError):
    pass


class NegativityClipExceeded(CrossJkoError, RuntimeError):
    pass


class ConfigError(CrossJkoError, ValueError):
    """Base for configuration problems; carries the offending key and line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)
        self.key = key
        self.line = line
        self.reason = message


class SchemaError(ConfigError):
    pass


class RangeError(ConfigError):
    pass
