import numpy as np
import pytest
from hypothesis import settings

# property tests run at least 200 generated cases from a fixed seed
settings.register_profile("default", max_examples=200, deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
