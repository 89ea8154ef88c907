import numpy as np
import pytest

from polyclass.image_prep import BinaryImage
from polyclass.contours import trace_contours


def square_mask(side, size=None, offset=3):
    size = size or side + 2 * offset
    m = np.zeros((size, size), dtype=np.uint8)
    m[offset : offset + side, offset : offset + side] = 1
    return BinaryImage(m)


def disk_mask(radius, size=None):
    size = size or 2 * radius + 10
    c = size // 2
    yy, xx = np.mgrid[0:size, 0:size]
    m = ((xx - c) ** 2 + (yy - c) ** 2 <= radius * radius).astype(np.uint8)
    return BinaryImage(m)


def random_blob_mask(rng, size=32):
    """Single connected blob: a union of random disks around the center."""
    m = np.zeros((size, size), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    cx = cy = size // 2
    for _ in range(rng.integers(2, 6)):
        ox = cx + rng.integers(-size // 6, size // 6 + 1)
        oy = cy + rng.integers(-size // 6, size // 6 + 1)
        r = rng.integers(3, size // 4)
        m |= ((xx - ox) ** 2 + (yy - oy) ** 2 <= r * r).astype(np.uint8)
    return BinaryImage(m)


def main_contour(mask):
    cs = trace_contours(mask)
    return max(cs, key=lambda c: len(c))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
