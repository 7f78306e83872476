import numpy as np
import pytest

from sublinear_lln import TwoPoint, ambiguity


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def coin_pair():
    """{TwoPoint(-1, 1, 0.4), TwoPoint(-1, 1, 0.6)}"""
    return ambiguity(TwoPoint(-1.0, 1.0, 0.4), TwoPoint(-1.0, 1.0, 0.6))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, line
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(line(k))
