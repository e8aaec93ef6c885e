import numpy as np
import pytest

from entropic_bridge.problems import random_problem, scalar_benchmark


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scalar():
    return scalar_benchmark()


@pytest.fixture(scope="session")
def random_2d():
    rng = np.random.default_rng(7)
    return [random_problem(rng, 2) for _ in range(5)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for i in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[i])
