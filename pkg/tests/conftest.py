import os

import pytest
from hypothesis import HealthCheck, settings

from tropkahler.degeneration import Family
from tropkahler.harness import load

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def cubic_doc():
    return load("cubic")


@pytest.fixture(scope="session")
def cubic(cubic_doc) -> Family:
    return cubic_doc.family()


@pytest.fixture(scope="session")
def simplex2() -> Family:
    return Family.from_mapping({(0, 0): 0, (1, 0): 0, (0, 1): 0})
