"""Shared fixtures."""
import os

import numpy as np
import pytest

from src.tensor import precision


def pytest_collection_modifyitems(config, items):
    if os.getenv("IUKAN_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="slow; set IUKAN_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    with precision("float64"):
        yield
