import os

import numpy as np
import pytest
from hypothesis import settings

from socnav.kernels import available_backends, get_backend

settings.register_profile("socnav", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("socnav")

BACKENDS = available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return get_backend(request.param)


@pytest.fixture(scope="session")
def both_backends():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    return get_backend("compiled"), get_backend("python")


def open_grid(rows, cols, wall=1):
    g = np.zeros((rows, cols), dtype=bool)
    g[:wall, :] = g[-wall:, :] = True
    g[:, :wall] = g[:, -wall:] = True
    return g


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SOCNAV_LONG") == "1":
        return
    skip = pytest.mark.skip(reason="long-running job; set SOCNAV_LONG=1")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)
