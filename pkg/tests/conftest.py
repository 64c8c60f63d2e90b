import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

os.environ.setdefault("VCCGM_THREADS", "0")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
