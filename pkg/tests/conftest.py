import numpy as np
import pytest

from spectral_lab.grid import make_grid
from spectral_lab.potentials import _stream_rng


@pytest.fixture
def grid1d():
    return make_grid(1, 16.0, 64)


@pytest.fixture
def grid2d():
    return make_grid(2, 16.0, 64)


@pytest.fixture
def rng():
    return _stream_rng(0xBEEF, 0)


def random_field(grid, rng) -> np.ndarray:
    return rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
