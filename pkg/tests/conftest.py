import logging

import pytest

from shadowrate.market import DualAssetParams, OptionSpec, SingleAssetParams


@pytest.fixture(autouse=True)
def _quiet_lattice_warnings():
    logging.getLogger("shadowrate").setLevel(logging.ERROR)
    yield


@pytest.fixture
def pair_params():
    return DualAssetParams(0.08, 0.2, 0.14, 0.4)


@pytest.fixture
def portfolio_spec():
    return OptionSpec(100.0, 1.0, 0.5)


@pytest.fixture
def single_params():
    return SingleAssetParams(0.10, 0.2, 0.05)


@pytest.fixture
def single_call():
    return OptionSpec(100.0, 1.0, payoff="call-on-single")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[2].rstrip(":").rstrip("ab")), s)):
            terminalreporter.write_line(line)
