from functools import lru_cache

import numpy as np
import pytest

from idgsem.physics import make_problem
from idgsem.solver import SolverConfig, advance, make_setup


@lru_cache(maxsize=None)
def cached_run(pid: int, viscosity: str = "full", n_cells=None, scheme=None, final_time=None, method="newton_with_picard_fallback"):
    setup = make_setup(make_problem(pid), viscosity=viscosity, n_cells=n_cells, scheme=scheme)
    return advance(setup, SolverConfig(method=method), final_time=final_time)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: one summary line per acceptance criterion, keyed by criterion number
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
