import numpy as np
import pytest

from elastica.curves import ElasticParams

PARAMS = [ElasticParams(1.0, 0.5), ElasticParams(1.0, 1.0), ElasticParams(2.0, 1.5)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=PARAMS, ids=lambda p: f"a{p.a}-b{p.b}")
def params(request):
    return request.param


def wrms(x, w):
    """Weighted L2 norm of nodal vectors."""
    x = np.asarray(x, dtype=float).reshape(len(w), -1)
    return float(np.sqrt(np.sum(w[:, None] * x * x)))
