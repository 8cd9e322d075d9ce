import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from revhom import bvp as B, duffing  # noqa: E402
from revhom.duffing import ExampleParams  # noqa: E402


@pytest.fixture(scope="session")
def resonant_bvp():
    p = ExampleParams.at_resonance(2, 0)
    return B.HomoclinicBVP(duffing.make_system(p), T=20.0, n_intervals=400)


@pytest.fixture(scope="session")
def exact_orbit(resonant_bvp):
    return B.solve(resonant_bvp, duffing.homoclinic_exact(resonant_bvp.mesh))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
