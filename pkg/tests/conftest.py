import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20221006)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs for more than a few seconds")
