import numpy as np
import pytest

from entropic_dynamics import _backend


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    prev = _backend.use_backend(request.param)
    yield request.param
    _backend.use_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
