from __future__ import annotations

import numpy as np
import pytest

from sdfsim import DepthImage, Heightfield, RngStream
from sdfsim.augment import REPROJECTION_EPS


class MidpointStream(RngStream):
    """Stub stream forcing every draw to the midpoint of its range."""

    def uniform(self, tag, frame, low=0.0, high=1.0, size=None, start=0):
        mid = (low + high) / 2.0
        return mid if size is None else np.full(size, mid)

    def normal(self, tag, frame, size=None, start=0):
        return 0.0 if size is None else np.zeros(size)

    def integers(self, tag, frame, low, high, size=None, start=0):
        mid = (low + high) // 2
        return mid if size is None else np.full(size, mid, dtype=np.int64)

    def permutation(self, tag, frame, n):
        return np.arange(n)


def flat_field(rows=200, cols=100, resolution=0.05, height=0.0) -> Heightfield:
    return Heightfield(origin=(0.0, 0.0), resolution=resolution,
                       heights=np.full((rows, cols), height, dtype=np.float32))


def brute_force_fuse(left: np.ndarray, right: np.ndarray, fx: float, b: float,
                     tau: float) -> np.ndarray:
    """Per-pixel reference implementation of the disparity-consistency fusion.

    Deliberately written with plain loops, independent of the vectorized path.
    """
    h, w = left.shape
    out = np.zeros((h, w), np.float32)
    for v in range(h):
        for u in range(w):
            dl = float(left[v, u])
            if dl <= 0.0:
                continue
            ur = u - fx * b / (dl + REPROJECTION_EPS)
            if ur < 0.0 or ur > w - 1:
                continue
            j0 = min(max(int(np.floor(ur)), 0), w - 1)
            j1 = min(j0 + 1, w - 1)
            t = min(max(ur - j0, 0.0), 1.0)
            r0, r1 = float(right[v, j0]), float(right[v, j1])
            if r0 <= 0.0 or (t != 0.0 and r1 <= 0.0):
                continue
            if abs(dl - (r0 * (1 - t) + r1 * t)) < tau * dl:
                out[v, u] = dl
    return out


@pytest.fixture
def midpoint_stream() -> MidpointStream:
    return MidpointStream(0, 0)


def constant_image(height: int, width: int, value: float) -> DepthImage:
    return DepthImage.full(height, width, value)
