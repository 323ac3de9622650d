import pytest

from rasql.agent_state import make_observation_state
from rasql.config import load_model, load_preset
from rasql.policies import PeriodicPolicy, Policy

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record a named acceptance verdict; the terminal summary lists them all."""

    def record(name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def paper_model():
    return load_model("paper")[0]


@pytest.fixture(scope="session")
def obs_asm():
    return make_observation_state(2, 2)


@pytest.fixture(scope="session")
def paper_behavior():
    return Policy([[0.2, 0.8], [0.8, 0.2]])


@pytest.fixture(scope="session")
def paper_periodic():
    return PeriodicPolicy((Policy([[0.2, 0.8], [0.8, 0.2]]), Policy([[0.8, 0.2], [0.2, 0.8]])))


@pytest.fixture(scope="session")
def stationary_config():
    return load_preset("paper-stationary")


@pytest.fixture(scope="session")
def periodic_config():
    return load_preset("paper-periodic")
