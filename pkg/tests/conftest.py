import numpy as np
import pytest

from ighartree.ground_state import solve
from ighartree.params import derive
from ighartree.spectral import GridSpec

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def params():
    return derive(2.0, 0.5, 2.5)


@pytest.fixture(scope="session")
def gs64(params):
    """Ground state at the reference resolution n=64, L=16."""
    return solve(params, GridSpec(64, 16.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
