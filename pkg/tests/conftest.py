import numpy as np
import pytest
from hypothesis import settings

from magloc.body import generate_phantom

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def phantom_2cm():
    return generate_phantom(resolution=0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
