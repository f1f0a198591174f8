import numpy as np
import pytest
from scipy import ndimage

from spectramatte.image import LinearImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def textured_array(height=96, width=128, seed=7, smooth=2.0):
    """Smooth random pattern, normalized to [0, 1]; rich texture for flow."""
    r = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(r.random((height, width)), smooth)
    base = (base - base.min()) / (base.max() - base.min())
    return base.astype(np.float32)


def shifted(array, dx, dy, order=3):
    """Shift content by (+dx, +dy) pixels with spline resampling."""
    h, w = array.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = ndimage.map_coordinates(array, [yy - dy, xx - dx], order=order, mode="nearest")
    return out.astype(np.float32)


def random_rgb(rng, height=24, width=32, low=0.0, high=1.0):
    return LinearImage(rng.uniform(low, high, (height, width, 3)).astype(np.float32))


def random_alpha(rng, height=24, width=32):
    return LinearImage(rng.uniform(0.0, 1.0, (height, width)).astype(np.float32))
