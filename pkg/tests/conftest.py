import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hcsbeam.geometry import C0

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = 2.0e9
LAM = C0 / F

_ACCEPTANCE = {}


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` for the end-of-run acceptance summary."""

    def record(criterion, passed, detail):
        line = f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_ACCEPTANCE[key])
