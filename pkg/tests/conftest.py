import numpy as np
import pytest

from slowfast_burgers.spectral import build_basis


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def basis32():
    return build_basis(32)


def unit(k, n=8, a=1.0):
    v = np.zeros(n)
    v[k - 1] = a
    return v
