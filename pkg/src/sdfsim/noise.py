"""Multi-octave gradient-lattice (Perlin) noise fields.

Five octaves with persistence 0.5 are summed, each octave doubling the
sample frequency, so outputs are bounded by the geometric amplitude sum
1.9375 times the single-octave bound. Gradient and permutation tables are
drawn per (environment, frame) from the deterministic stream, which makes
fields time-dependent yet exactly reproducible.

Gradients are hashed once per lattice node and gathered per pixel; the
static pixel-to-node index grids are cached per image size.
"""

from __future__ import annotations

import numpy as np

from .rng import RngStream, _raw, _stream_state

OCTAVES = 5
PERSISTENCE = 0.5
AMPLITUDE_SUM = sum(PERSISTENCE**o for o in range(OCTAVES))  # 1.9375
BASE_CELLS_ACROSS_WIDTH = 4.0
TABLE_SIZE = 256

# empirical continuity bound (brute-force scan over generated fields): the
# largest adjacent-pixel difference observed is well under this value
ADJACENT_DIFF_BOUND = 0.8


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


class _Grid:
    """Static per-size sampling geometry shared by all fields of that size."""

    def __init__(self, height: int, width: int):
        scale = BASE_CELLS_ACROSS_WIDTH / width
        freqs = scale * (2.0 ** np.arange(OCTAVES))
        x = np.arange(width, dtype=np.float64)[None, None, :] * freqs[:, None, None]
        y = np.arange(height, dtype=np.float64)[None, :, None] * freqs[:, None, None]
        xi = np.floor(x).astype(np.int64)  # (octaves, 1, W)
        yi = np.floor(y).astype(np.int64)  # (octaves, H, 1)
        self.fx = x - xi
        self.fy = y - yi
        self.u = _fade(self.fx)
        self.v = _fade(self.fy)

        # per-octave node grids sized to the sampled lattice span (+1 corner)
        self.node_x = [int(xi[o].max()) + 2 for o in range(OCTAVES)]
        self.node_y = [int(yi[o].max()) + 2 for o in range(OCTAVES)]
        offsets = np.concatenate([[0], np.cumsum([nx * ny for nx, ny in
                                                  zip(self.node_x, self.node_y)])])
        self.total_nodes = int(offsets[-1])

        # flat node index of each pixel's lower corner, per octave
        flat00 = np.empty((OCTAVES, height, width), dtype=np.int64)
        stride = np.empty(OCTAVES, dtype=np.int64)
        for o in range(OCTAVES):
            stride[o] = self.node_y[o]
            flat00[o] = offsets[o] + xi[o] * stride[o] + yi[o]
        self.k00 = flat00
        self.k01 = flat00 + 1
        self.k10 = flat00 + stride[:, None, None]
        self.k11 = self.k10 + 1

        # node lattice coordinates for hashing, per octave (flat layout)
        self.node_ix = np.concatenate(
            [np.repeat(np.arange(nx), ny) for nx, ny in zip(self.node_x, self.node_y)])
        self.node_iy = np.concatenate(
            [np.tile(np.arange(ny), nx) for nx, ny in zip(self.node_x, self.node_y)])
        self.node_octave = np.concatenate(
            [np.full(nx * ny, o) for o, (nx, ny) in
             enumerate(zip(self.node_x, self.node_y))])


_GRID_CACHE: dict[tuple[int, int], _Grid] = {}


def _grid(height: int, width: int) -> _Grid:
    key = (height, width)
    grid = _GRID_CACHE.get(key)
    if grid is None:
        grid = _GRID_CACHE[key] = _Grid(height, width)
    return grid


class PerlinField:
    """One generated noise grid matching an image size.

    The base lattice spans BASE_CELLS_ACROSS_WIDTH cells across the image
    width; octave o samples at 2**o times that frequency with its own
    gradient and permutation tables (rows of one batched draw).
    """

    def __init__(self, rng: RngStream, frame: int, height: int, width: int):
        self.height = height
        self.width = width
        grid = _grid(height, width)
        mask = TABLE_SIZE - 1

        # one batched draw per table kind; row o is octave o's table
        perm_state = _stream_state(rng.master_seed, rng.env_id, "perlin.perm", frame)
        keys = _raw(perm_state, np.arange(OCTAVES * TABLE_SIZE, dtype=np.uint64))
        perms = np.argsort(keys.reshape(OCTAVES, TABLE_SIZE), axis=1, kind="stable")
        angles = rng.uniform("perlin.grad", frame, 0.0, 2.0 * np.pi,
                             size=OCTAVES * TABLE_SIZE)
        flat_perm = perms.ravel()
        base = grid.node_octave * TABLE_SIZE

        # hash each lattice node once, then gather per pixel
        inner = flat_perm[base + (grid.node_ix & mask)]
        h = base + flat_perm[base + ((inner + grid.node_iy) & mask)]
        node_gx = np.cos(angles)[h]
        node_gy = np.sin(angles)[h]

        fx, fy, u, v = grid.fx, grid.fy, grid.u, grid.v
        n00 = node_gx[grid.k00] * fx + node_gy[grid.k00] * fy
        n10 = node_gx[grid.k10] * (fx - 1.0) + node_gy[grid.k10] * fy
        n01 = node_gx[grid.k01] * fx + node_gy[grid.k01] * (fy - 1.0)
        n11 = node_gx[grid.k11] * (fx - 1.0) + node_gy[grid.k11] * (fy - 1.0)

        nx0 = n00 + u * (n10 - n00)
        nx1 = n01 + u * (n11 - n01)
        per_octave = nx0 + v * (nx1 - nx0)

        weights = PERSISTENCE ** np.arange(OCTAVES)
        self.values = np.tensordot(weights, per_octave, axes=1).astype(np.float32)
