import pytest

from gnlab.model import make_power_model
from gnlab.solitary_wave import solve_wave
from gnlab.linearization import potentials

ACCEPTANCE = []


@pytest.fixture(scope="session")
def wave23():
    return solve_wave(make_power_model(2), 0.3)


@pytest.fixture(scope="session")
def pot23(wave23):
    return potentials(wave23)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
