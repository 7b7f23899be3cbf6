import pytest
from hypothesis import settings

from entrolab.group import GroupSpec

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def Z():
    return GroupSpec.lattice(1)


@pytest.fixture
def F2():
    return GroupSpec.free(2)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    lines = getattr(test_acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
