import pytest

from parametrix.coefficients import example_catalog
from parametrix.engine import EngineConfig, ParametrixEngine

EX1_TARGETS = [0.01, 0.02, 0.04, 0.05]

# lines printed once per acceptance criterion in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def accept():
    def record(number: int, passed: bool, text: str) -> None:
        ACCEPTANCE_LINES[number] = f"AC{number:02d} {'PASS' if passed else 'FAIL'}  {text}"
    return record


@pytest.fixture(scope="session")
def ex1():
    return example_catalog("ex1")


@pytest.fixture(scope="session")
def ex1_default(ex1):
    c, p, ah = ex1
    return ParametrixEngine(c, p, ah, EngineConfig()).build(EX1_TARGETS)


@pytest.fixture(scope="session")
def ex1_refined(ex1):
    c, p, ah = ex1
    return ParametrixEngine(c, p, ah, EngineConfig().refined()).build(EX1_TARGETS)


@pytest.fixture(scope="session")
def ex1_coarse(ex1):
    """Cheap build for tests that only need a structurally valid table."""
    c, p, ah = ex1
    return ParametrixEngine(c, p, ah, EngineConfig(x_lo=-1.5, x_hi=2.5, dx=0.05)).build([0.02, 0.04])


@pytest.fixture(scope="session")
def cauchy_const():
    return example_catalog("cauchy-const")


@pytest.fixture(scope="session")
def cauchy_build(cauchy_const):
    c, p, ah = cauchy_const
    return ParametrixEngine(c, p, ah, EngineConfig(x_lo=-2.0, x_hi=2.0, dx=0.05)).build([0.05, 0.1])
