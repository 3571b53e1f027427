import numpy as np
import pytest

from pmbm import _kernels
from pmbm.models import ExtendedMeasModel, PointMeasModel, constant_velocity, position_matrix
from pmbm.state import GaussianDensity, GGIWParams, HybridDensity


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    prev = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def models():
    H = position_matrix()
    return (constant_velocity(1.0, 0.25, 0.99), PointMeasModel(H, np.eye(2), 0.95),
            ExtendedMeasModel(H, 0.95))


def random_spd(rng, d, scale=1.0):
    A = rng.normal(size=(d, d))
    return scale * (A @ A.T + d * np.eye(d))


def random_ggiw(rng, d=2, n=4):
    return GGIWParams(rng.uniform(5, 50), rng.uniform(0.5, 6), rng.normal(0, 5, n),
                      random_spd(rng, n, 2.0), rng.uniform(2 * d + 3, 40), random_spd(rng, d, 10.0))


def random_gaussian(rng, n=4):
    return GaussianDensity(rng.normal(0, 5, n), random_spd(rng, n, 2.0))


def random_hybrid(rng, c=None):
    c = rng.choice([0.0, 1.0, rng.uniform(0.05, 0.95)]) if c is None else c
    return HybridDensity(c, random_gaussian(rng) if c > 0 else None,
                         random_ggiw(rng) if c < 1 else None)
