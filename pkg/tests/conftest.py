import numpy as np
import pytest

from vpclassify.funcgrid import Curve, CurvePanel, make_uniform_grid


@pytest.fixture
def grid64():
    return make_uniform_grid(64)


@pytest.fixture
def grid512():
    return make_uniform_grid(512)


def random_panel(grid, n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return CurvePanel(grid, scale * rng.standard_normal((n, grid.size)))


def curve(grid, values):
    return Curve(grid, np.asarray(values, dtype=float))
