from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(ac: str, passed: bool, detail: str = "") -> None:
    """Store the outcome of one acceptance criterion for the end-of-run summary."""
    ACCEPTANCE[ac] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE[ac]
        terminalreporter.write_line(f"{ac} {'PASS' if ok else 'FAIL'}  {detail}")
