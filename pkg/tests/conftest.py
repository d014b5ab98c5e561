import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from tvdb.grid import GridSpec, StateVector

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"

# acceptance criteria append (label, passed, detail) here; printed at the end of the session
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return GridSpec(8, 6)


@pytest.fixture(scope="session")
def prox_golden():
    return json.loads((DATA / "prox_golden.json").read_text())


def state_from_arrays(grid, bulk, bottom, top):
    return StateVector(grid, bulk, bottom, top)
