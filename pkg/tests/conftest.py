import numpy as np
import pytest

from brwre.stats import TestFunction

# not a test class, despite the name
TestFunction.__test__ = False


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)
