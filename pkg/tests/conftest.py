import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("kpds", deadline=None, max_examples=30)
settings.load_profile("kpds")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
