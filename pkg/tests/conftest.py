import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ltpid import PeriodicMatrix, SamplingGrid, simulate

settings.register_profile("ltpid", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ltpid")


def constant(value, period=1.0):
    value = np.atleast_2d(np.asarray(value, dtype=float))
    return PeriodicMatrix(period, {0: value})


def cosine(coef, period=1.0, k=1):
    """Scalar ``coef * cos(k w t)`` as a phasor family."""
    half = np.array([[coef / 2]], dtype=complex)
    return PeriodicMatrix(period, {k: half, -k: half})


@pytest.fixture
def grid64():
    return SamplingGrid(1.0, 64, 3 * 64 + 1, substeps=8)


@pytest.fixture
def smooth_trajectory():
    """Scalar x' = (-0.3 + 0.4 cos wt) x + u with a single-harmonic input, N = 256."""
    from ltpid.simulate import InputSignal
    A = PeriodicMatrix(1.0, {0: np.array([[-0.3]]), 1: np.array([[0.2]]), -1: np.array([[0.2]])})
    B = constant(1.0)
    u = InputSignal(1, (cosine(1.0),), np.inf)
    grid = SamplingGrid(1.0, 256, 3 * 256 + 1, substeps=4)
    return simulate(A, B, u, [1.0], grid)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
