import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_feasible_values  # noqa: E402

from matchcert.pwa_grid import GridFunction  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def feasible_grid(rng):
    return GridFunction(6, random_feasible_values(6, rng))


def constant_grid(n, c):
    return GridFunction(n, np.full((n + 1, n + 1), c))
