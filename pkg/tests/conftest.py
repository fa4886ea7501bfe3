import pytest

from critperiods.poly import SystemSpec


@pytest.fixture
def fig4():
    return SystemSpec("separable-odd", (2,), (4,))


@pytest.fixture
def harmonic():
    return SystemSpec("potential-odd")


@pytest.fixture
def beta1():
    return SystemSpec("potential-odd", (1,))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
