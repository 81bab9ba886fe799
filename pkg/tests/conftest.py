import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_dense(group, rng):
    from corners_lab.spectral import DenseMap

    vals = rng.normal(size=group.N) + 1j * rng.normal(size=group.N)
    return DenseMap(group, vals)


def random_mask(n, p, rng):
    return rng.random(n) < p
