import numpy as np
import pytest

from tailcop import Clayton, stream


@pytest.fixture
def clayton_half():
    return Clayton(0.5)


@pytest.fixture
def small_sample():
    # 4 points whose ranks are (1,1), (2,3), (3,2), (4,4)
    return np.array([
        [0.11, 0.21],
        [0.42, 0.83],
        [0.57, 0.66],
        [0.93, 0.95],
    ])


@pytest.fixture
def clayton_data():
    return Clayton(0.5).sample(1000, stream(12345))
