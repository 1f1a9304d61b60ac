import numpy as np
import pytest

from hashpop.model import Discrete, GammaKernel, NetworkParams, degree_moments


@pytest.fixture
def small_discrete():
    return Discrete((1, 2, 3), (0.5, 0.3, 0.2))


@pytest.fixture
def small_network(small_discrete):
    mom = degree_moments(small_discrete)
    return NetworkParams(50, mom.mean, mom.mean_sq)


@pytest.fixture
def kernel():
    return GammaKernel(2.0, 1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
