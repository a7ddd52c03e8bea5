import logging

import numpy as np
import pytest

from mlmc import _accel

# the singular-value fallback warns on every nearly-reversible Ulam chain
logging.getLogger("mlmc").setLevel(logging.ERROR)

TWO_STATE = np.array([[0.9, 0.1], [0.2, 0.8]])


@pytest.fixture
def two_state():
    return TWO_STATE.copy()


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)
