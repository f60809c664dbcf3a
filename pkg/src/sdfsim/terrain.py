"""Procedural parkour terrain generation and privileged height scans.

Terrains are discrete heightfields generated per (family, difficulty, seed).
Each family exposes one characteristic dimension that scales linearly with
the 20-level difficulty curriculum: level 19 realizes the full evaluation
dimension and level 0 realizes 10% of it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .rng import RngStream

DIFFICULTY_LEVELS = 20

# characteristic dimensions at the hardest level (meters)
STAIR_RISER_MAX = 0.15
STAIR_TREAD = 0.30
GAP_WIDTH_MAX = 0.45
PLATFORM_HEIGHT_MAX = 0.40
GAP_DEPTH = 0.80  # trench depth; deep enough to read clearly in depth images

# privileged height-scan window: 1.2 m ahead, 0.4 m behind, +-0.5 m lateral,
# sampled every 0.05 m -> 33 forward stations x 21 lateral stations = 693
SCAN_RESOLUTION = 0.05
SCAN_FORWARD = 1.2
SCAN_BACKWARD = 0.4
SCAN_HALF_WIDTH = 0.5
SCAN_ROWS = 21  # lateral, left -> right
SCAN_COLS = 33  # forward, rear -> front

_HFLD_MAGIC = b"HFLD"


class TerrainFamily(Enum):
    STAIRS_UP = "StairsUp"
    STAIRS_DOWN = "StairsDown"
    PLATFORM_UP = "PlatformUp"
    PLATFORM_DOWN = "PlatformDown"
    GAP = "Gap"
    ROUGH = "Rough"


class TerrainCategory(Enum):
    """Critic/discriminator routing label; exactly three categories exist."""

    STAIRS_PLATFORMS = 1
    GAP_CROSSING = 2
    ROUGH = 3


_CATEGORY_BY_FAMILY = {
    TerrainFamily.STAIRS_UP: TerrainCategory.STAIRS_PLATFORMS,
    TerrainFamily.STAIRS_DOWN: TerrainCategory.STAIRS_PLATFORMS,
    TerrainFamily.PLATFORM_UP: TerrainCategory.STAIRS_PLATFORMS,
    TerrainFamily.PLATFORM_DOWN: TerrainCategory.STAIRS_PLATFORMS,
    TerrainFamily.GAP: TerrainCategory.GAP_CROSSING,
    TerrainFamily.ROUGH: TerrainCategory.ROUGH,
}


@dataclass(frozen=True)
class TerrainSpec:
    """Parameterization of one terrain patch.

    extent is (length, width) in meters; length runs along +x (direction of
    travel), width along +y.
    """

    family: TerrainFamily
    difficulty: int
    cell_resolution: float = 0.05
    extent: tuple[float, float] = (12.0, 4.0)
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.family, TerrainFamily):
            object.__setattr__(self, "family", TerrainFamily(self.family))
        if not 0 <= int(self.difficulty) < DIFFICULTY_LEVELS:
            raise ValueError(
                f"difficulty must be in [0, {DIFFICULTY_LEVELS - 1}], got {self.difficulty}"
            )
        if self.cell_resolution <= 0:
            raise ValueError("cell_resolution must be positive")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("extent must be strictly positive")

    @property
    def difficulty_scale(self) -> float:
        """Linear curriculum factor: 0.1 at level 0, 1.0 at level 19."""
        return 0.1 + 0.9 * self.difficulty / (DIFFICULTY_LEVELS - 1)


@dataclass(frozen=True)
class Heightfield:
    """Row-major grid of terrain heights.

    Axis 0 indexes x (forward, `length`), axis 1 indexes y (lateral, `width`).
    World position of cell (i, j) is (origin_x + i*res, origin_y + j*res).
    Instances are immutable after construction.
    """

    origin: tuple[float, float]
    resolution: float
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = np.ascontiguousarray(self.heights, dtype=np.float32)
        if h.ndim != 2:
            raise ValueError("heights must be a 2-D grid")
        if not np.all(np.isfinite(h)):
            raise ValueError("heights must be finite")
        h.flags.writeable = False
        object.__setattr__(self, "heights", h)

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    @property
    def length(self) -> float:
        return (self.rows - 1) * self.resolution

    @property
    def width(self) -> float:
        return (self.cols - 1) * self.resolution

    def grid_coords(self, x, y):
        gx = (np.asarray(x, dtype=np.float64) - self.origin[0]) / self.resolution
        gy = (np.asarray(y, dtype=np.float64) - self.origin[1]) / self.resolution
        return gx, gy

    def in_bounds(self, x, y):
        gx, gy = self.grid_coords(x, y)
        return (gx >= 0) & (gx <= self.rows - 1) & (gy >= 0) & (gy <= self.cols - 1)

    def sample(self, x, y):
        """Bilinear height at world (x, y); out-of-bounds clamps to the edge."""
        gx, gy = self.grid_coords(x, y)
        gx = np.clip(gx, 0.0, self.rows - 1)
        gy = np.clip(gy, 0.0, self.cols - 1)
        i0 = np.minimum(gx.astype(np.int64), self.rows - 2) if self.rows > 1 else np.zeros_like(gx, np.int64)
        j0 = np.minimum(gy.astype(np.int64), self.cols - 2) if self.cols > 1 else np.zeros_like(gy, np.int64)
        i1 = np.minimum(i0 + 1, self.rows - 1)
        j1 = np.minimum(j0 + 1, self.cols - 1)
        tx = gx - i0
        ty = gy - j0
        h = self.heights
        top = h[i0, j0] * (1 - ty) + h[i0, j1] * ty
        bot = h[i1, j0] * (1 - ty) + h[i1, j1] * ty
        out = top * (1 - tx) + bot * tx
        return out if out.ndim else float(out)

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = _HFLD_MAGIC + struct.pack(
            "<IIfff", self.rows, self.cols, self.resolution, self.origin[0], self.origin[1]
        )
        return header + self.heights.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Heightfield":
        if blob[:4] != _HFLD_MAGIC:
            raise ValueError("not a HFLD blob (bad magic)")
        rows, cols, res, ox, oy = struct.unpack_from("<IIfff", blob, 4)
        body = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=24)
        return cls(origin=(ox, oy), resolution=res, heights=body.reshape(rows, cols))

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Heightfield":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


@dataclass(frozen=True)
class HeightScan:
    """693 privileged height samples around the robot base.

    values has shape (21, 33): rows sweep laterally from the robot's left
    (+0.5 m) to its right (-0.5 m); columns sweep from 0.4 m behind the base
    to 1.2 m ahead. Heights are relative to base z. valid marks samples whose
    window point lay inside the field (clamped samples are flagged False).
    """

    WINDOW = (SCAN_FORWARD + SCAN_BACKWARD, 2 * SCAN_HALF_WIDTH)  # 1.6 m x 1.0 m
    RESOLUTION = SCAN_RESOLUTION

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.values.shape != (SCAN_ROWS, SCAN_COLS):
            raise ValueError(f"scan must be {SCAN_ROWS}x{SCAN_COLS}")
        if self.valid.shape != (SCAN_ROWS, SCAN_COLS):
            raise ValueError("validity mask shape mismatch")

    @property
    def count(self) -> int:
        return self.values.size

    def flattened(self) -> np.ndarray:
        """Forward-major feature vector: each forward station left-to-right."""
        return self.values.ravel(order="F")


def terrain_category(spec: TerrainSpec) -> TerrainCategory:
    return _CATEGORY_BY_FAMILY[spec.family]


# ---------------------------------------------------------------------------
# generators


def _cells(meters: float, resolution: float) -> int:
    return int(round(meters / resolution))


def _require_cells(rows: int, needed: int, family: TerrainFamily):
    if rows < needed:
        raise ValueError(
            f"{family.value}: extent smaller than one feature period "
            f"({rows} cells available, {needed} needed)"
        )


def _stairs(rows: int, cols: int, res: float, riser: float, descending: bool) -> np.ndarray:
    pad = _cells(2.0, res)
    tread = max(1, _cells(STAIR_TREAD, res))
    heights = np.zeros((rows, cols), dtype=np.float32)
    n_steps = (rows - 2 * pad) // tread
    sign = -1.0 if descending else 1.0
    for k in range(n_steps):
        lo = pad + k * tread
        heights[lo:, :] = sign * (k + 1) * riser
    return heights


def _gap(rows: int, cols: int, res: float, width_m: float) -> np.ndarray:
    heights = np.zeros((rows, cols), dtype=np.float32)
    trench = max(1, _cells(width_m, res))
    start = rows // 2 - trench // 2
    heights[start : start + trench, :] = -GAP_DEPTH
    return heights


def _platform(rows: int, cols: int, height_m: float, descending: bool) -> np.ndarray:
    heights = np.zeros((rows, cols), dtype=np.float32)
    if descending:
        heights[: rows // 2, :] = height_m
    else:
        heights[rows // 3 : 2 * rows // 3, :] = height_m
    return heights


def _rough(rows: int, cols: int, amplitude: float, seed: int) -> np.ndarray:
    stream = RngStream(seed, env_id=0)
    raw = stream.uniform("terrain.rough", 0, -amplitude, amplitude, size=rows * cols)
    raw = raw.reshape(rows, cols)
    # one 3x3 box smoothing pass (edge replicated); keeps |h| <= amplitude
    padded = np.pad(raw, 1, mode="edge")
    smooth = np.zeros_like(raw)
    for di in range(3):
        for dj in range(3):
            smooth += padded[di : di + rows, dj : dj + cols]
    return (smooth / 9.0).astype(np.float32)


def make_terrain(spec: TerrainSpec) -> Heightfield:
    """Generate the heightfield for a terrain spec.

    Deterministic: the same spec (including seed) always yields a bit-identical
    grid. Raises ValueError when the extent cannot hold one feature period.
    """
    res = spec.cell_resolution
    rows = _cells(spec.extent[0], res)
    cols = _cells(spec.extent[1], res)
    scale = spec.difficulty_scale
    fam = spec.family

    if fam in (TerrainFamily.STAIRS_UP, TerrainFamily.STAIRS_DOWN):
        _require_cells(rows, 2 * _cells(2.0, res) + _cells(STAIR_TREAD, res), fam)
        heights = _stairs(rows, cols, res, STAIR_RISER_MAX * scale,
                          descending=fam is TerrainFamily.STAIRS_DOWN)
    elif fam is TerrainFamily.GAP:
        _require_cells(rows, 2 * _cells(1.0, res) + _cells(GAP_WIDTH_MAX, res), fam)
        heights = _gap(rows, cols, res, GAP_WIDTH_MAX * scale)
    elif fam in (TerrainFamily.PLATFORM_UP, TerrainFamily.PLATFORM_DOWN):
        _require_cells(rows, 6, fam)
        heights = _platform(rows, cols, PLATFORM_HEIGHT_MAX * scale,
                            descending=fam is TerrainFamily.PLATFORM_DOWN)
    elif fam is TerrainFamily.ROUGH:
        _require_cells(rows, 3, fam)
        amplitude = 0.01 + 0.01 * spec.difficulty
        heights = _rough(rows, cols, amplitude, spec.seed)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown family {fam}")

    return Heightfield(origin=(0.0, 0.0), resolution=res, heights=heights)


def characteristic_dimension(spec: TerrainSpec) -> float:
    """The difficulty-scaled dimension of a family (riser / trench / slab / amplitude)."""
    fam = spec.family
    if fam in (TerrainFamily.STAIRS_UP, TerrainFamily.STAIRS_DOWN):
        return STAIR_RISER_MAX * spec.difficulty_scale
    if fam is TerrainFamily.GAP:
        return GAP_WIDTH_MAX * spec.difficulty_scale
    if fam in (TerrainFamily.PLATFORM_UP, TerrainFamily.PLATFORM_DOWN):
        return PLATFORM_HEIGHT_MAX * spec.difficulty_scale
    return 0.01 + 0.01 * spec.difficulty


# ---------------------------------------------------------------------------
# height scan


def scan_offsets() -> tuple[np.ndarray, np.ndarray]:
    """Base-frame window offsets: (forward x per column, lateral y per row)."""
    x = -SCAN_BACKWARD + SCAN_RESOLUTION * np.arange(SCAN_COLS)
    y = SCAN_HALF_WIDTH - SCAN_RESOLUTION * np.arange(SCAN_ROWS)
    return x, y


def height_scan(field: Heightfield, base_pose: tuple[float, float, float, float]) -> HeightScan:
    """Sample the ego-centric window around base_pose = (x, y, yaw, z).

    Window points are rotated by yaw about the base, heights are bilinearly
    interpolated and reported relative to base z. Points outside the field
    clamp to the border and are flagged invalid in the mask.
    """
    bx, by, yaw, bz = base_pose
    x_off, y_off = scan_offsets()
    xo = np.broadcast_to(x_off[None, :], (SCAN_ROWS, SCAN_COLS))
    yo = np.broadcast_to(y_off[:, None], (SCAN_ROWS, SCAN_COLS))
    c, s = np.cos(yaw), np.sin(yaw)
    wx = bx + c * xo - s * yo
    wy = by + s * xo + c * yo
    values = (field.sample(wx, wy) - bz).astype(np.float32)
    valid = field.in_bounds(wx, wy)
    return HeightScan(values=values, valid=valid)
