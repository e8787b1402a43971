import numpy as np
import pytest

from signret.blcore import BandLimitedSignal, FrequencySupport, Grid
from signret.experiments import curvelet_setup, meyer_setup


def random_bl(support, rng):
    """Random real signal with white spectrum on ``support``."""
    grid = support.grid
    spec = np.zeros(grid.shape, complex)
    m = support.mask
    spec[m] = rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())
    return BandLimitedSignal.project(grid, np.fft.ifftn(spec).real, support)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def meyer():
    return meyer_setup()


@pytest.fixture(scope="session")
def curvelet():
    return curvelet_setup()


@pytest.fixture
def small_grid():
    return Grid((64,), (64.0,))


@pytest.fixture
def small_box(small_grid):
    # bins |k| <= 3 on a unit-spaced grid
    return FrequencySupport.box(small_grid, 3.5 / 64)
