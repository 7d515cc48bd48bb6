import numpy as np
import pytest

from wastesight.core import RasterImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def solid(width: int, height: int, color) -> RasterImage:
    return RasterImage.filled(width, height, tuple(color))


def random_image(rng, width: int, height: int) -> RasterImage:
    return RasterImage(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
