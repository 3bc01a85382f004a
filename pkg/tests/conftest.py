import math
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


def naive_length(points, perm):
    """Independent tour-length oracle: a plain Python loop over math.hypot."""
    total = 0.0
    n = len(perm)
    for i in range(n):
        a = points[perm[i]]
        b = points[perm[(i + 1) % n]]
        total += math.hypot(float(a[0]) - float(b[0]), float(a[1]) - float(b[1]))
    return total


@pytest.fixture
def square():
    from tspmdf import TspInstance

    return TspInstance(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


@pytest.fixture
def data_dir():
    return DATA
