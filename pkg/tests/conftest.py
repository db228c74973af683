import numpy as np
import pytest

from bihmap.grid import GridDomain

_REPORT = []


def record(label: str, ok: bool, detail: str) -> bool:
    """Log one acceptance line (shown in the terminal summary) and return ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    _REPORT.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def dom24():
    """m=5, N=24 offset grid: the origin is a cell center."""
    return GridDomain(5, 24, 23 / 48)


@pytest.fixture(scope="session")
def radial24(dom24):
    from bihmap.oracle import radial

    return radial(5).rasterize(dom24)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
