"""Pinhole stereo rig modeling and depth rendering against heightfields.

Depth convention: every pixel stores z-depth, the distance along the optical
axis to the terrain intersection, in meters. 0.0 is the invalid sentinel
(ray missed within the march range). Camera frame: +z optical axis, +x image
right, +y image down; with zero roll/pitch/yaw the optical axis points along
world +x and the image x axis along world -y.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import RngStream
from .rotations import rpy_matrix
from .terrain import Heightfield

INVALID_DEPTH = 0.0
MAX_MARCH_DISTANCE = 4.0

# startup-stage calibration randomization ranges
FOCAL_SCALE_RANGE = (0.90, 1.10)
MOUNT_POS_OFFSET = 0.05  # meters, per axis
MOUNT_ROT_OFFSET = 0.10  # radians, per axis

# columns: camera x, y, z axes expressed in the forward-x world frame
_CAMERA_BASIS = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class CameraExtrinsics:
    """Mounting perturbation: position offset (m) and rpy offset (rad), mount frame."""

    dp: tuple[float, float, float] = (0.0, 0.0, 0.0)
    dtheta: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StereoRig:
    """Two pinhole cameras on a rigid mount, separated by `baseline` along camera x.

    mount_pos / mount_rpy place the rig center relative to the robot base;
    the cameras share image dimensions. baseline 0 is permitted (degenerate
    rig, useful for pass-through testing).
    """

    left: CameraIntrinsics
    right: CameraIntrinsics
    baseline: float
    mount_pos: tuple[float, float, float] = (0.10, 0.0, 0.65)
    mount_rpy: tuple[float, float, float] = (0.0, np.deg2rad(60.0), 0.0)
    left_ext: CameraExtrinsics = field(default_factory=CameraExtrinsics)
    right_ext: CameraExtrinsics = field(default_factory=CameraExtrinsics)

    def __post_init__(self):
        if self.baseline < 0:
            raise ValueError("baseline must be non-negative")
        if (self.left.width, self.left.height) != (self.right.width, self.right.height):
            raise ValueError("left/right cameras must share image dimensions")


def default_rig(width: int = 40, height: int = 30, fx: float = 21.0, fy: float = 21.0,
                baseline: float = 0.05, **kwargs) -> StereoRig:
    intr = CameraIntrinsics(fx=fx, fy=fy, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                            width=width, height=height)
    return StereoRig(left=intr, right=intr, baseline=baseline, **kwargs)


@dataclass(frozen=True)
class DepthImage:
    """Row-major grid of metric depths; 0.0 marks an invalid measurement."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.data, dtype=np.float32)
        if d.ndim != 2:
            raise ValueError("depth image must be 2-D")
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def valid_mask(self) -> np.ndarray:
        return self.data > 0.0

    @classmethod
    def full(cls, height: int, width: int, value: float) -> "DepthImage":
        return cls(np.full((height, width), value, dtype=np.float32))


# ---------------------------------------------------------------------------
# rendering


_PIXEL_DIR_CACHE: dict = {}


def _pixel_dirs(intr: CameraIntrinsics) -> np.ndarray:
    """Unnormalized camera-frame ray directions, one per pixel, z = 1."""
    key = (intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height)
    cached = _PIXEL_DIR_CACHE.get(key)
    if cached is not None:
        return cached
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    xu = (u[None, :] - intr.cx) / intr.fx
    yv = (v[:, None] - intr.cy) / intr.fy
    dirs = np.empty((intr.height, intr.width, 3))
    dirs[..., 0] = xu
    dirs[..., 1] = yv
    dirs[..., 2] = 1.0
    dirs.flags.writeable = False
    _PIXEL_DIR_CACHE[key] = dirs
    return dirs


def _march(field: Heightfield, origins: np.ndarray, dirs: np.ndarray,
           max_distance: float) -> np.ndarray:
    """Core heightfield ray march over per-ray origins and directions.

    Rays above the terrain's global maximum first leap analytically to that
    ceiling plane (no intersection can exist above it), then march with a
    metric step of half the terrain cell; the bracketing step is refined by
    linear interpolation, which is exact on planar patches. Returns z-depth
    per ray (the s in p = origin + dir * s, with dir_z scaled so s is depth);
    misses are 0. Purely elementwise per ray, so batching rays from several
    views changes nothing.
    """
    heights = field.heights.astype(np.float64)
    rows, cols = heights.shape
    flat = heights.ravel()
    inv_res = 1.0 / field.resolution
    h_top = float(heights.max())

    n = dirs.shape[0]
    norms = np.sqrt(dirs[:, 0] ** 2 + dirs[:, 1] ** 2 + dirs[:, 2] ** 2)
    ds = (field.resolution * 0.5) / norms  # z-depth step per metric half-cell
    smax = max_distance / norms
    depth = np.zeros(n, dtype=np.float64)

    # precompute grid-space ray parameterization: g(s) = a + b * s
    ax = (origins[:, 0] - field.origin[0]) * inv_res
    ay = (origins[:, 1] - field.origin[1]) * inv_res
    az = origins[:, 2]
    bx = dirs[:, 0] * inv_res
    by = dirs[:, 1] * inv_res
    bz = dirs[:, 2]

    def surface_gap(s):
        gx = np.minimum(np.maximum(ax + bx * s, 0.0), rows - 1.0)
        gy = np.minimum(np.maximum(ay + by * s, 0.0), cols - 1.0)
        i0 = np.minimum(gx.astype(np.int64), rows - 2)
        j0 = np.minimum(gy.astype(np.int64), cols - 2)
        tx = gx - i0
        ty = gy - j0
        k = i0 * cols + j0
        g00 = flat[k]
        g01 = flat[k + 1]
        g10 = flat[k + cols]
        g11 = flat[k + cols + 1]
        top = g00 + ty * (g01 - g00)
        bot = g10 + ty * (g11 - g10)
        return az + bz * s - (top + tx * (bot - top))

    # ceiling leap: descending rays start where they cross z = h_top; rays
    # above that never descend to it are misses outright
    starts_above = az > h_top
    descending = bz < 0.0
    s0 = np.where(starts_above & descending,
                  (h_top - az) / np.where(descending, bz, -1.0), 0.0)
    s0 = np.maximum(s0 - ds, 0.0)  # back off one step to keep the bracket
    live = (~starts_above | descending) & (s0 < smax)

    idx = np.flatnonzero(live)
    ax, ay, az = ax[idx], ay[idx], az[idx]
    bx, by, bz = bx[idx], by[idx], bz[idx]
    ds = ds[idx]
    smax = smax[idx]
    s = s0[idx]
    f_prev = surface_gap(s)
    # the camera-above check and the ceiling leap both keep f_prev > 0 here

    while idx.size:
        s_new = s + ds
        f = surface_gap(s_new)
        hit = f <= 0.0
        if hit.any():
            fp = f_prev[hit]
            depth[idx[hit]] = s[hit] + ds[hit] * fp / (fp - f[hit])
        keep = ~hit & (s_new < smax)
        if keep.all():
            s = s_new
            f_prev = f
        else:
            idx = idx[keep]
            ax, ay, az = ax[keep], ay[keep], az[keep]
            bx, by, bz = bx[keep], by[keep], bz[keep]
            ds, smax = ds[keep], smax[keep]
            s = s_new[keep]
            f_prev = f[keep]

    return depth


def render_from_matrix(field: Heightfield, position: np.ndarray, r_wc: np.ndarray,
                       intr: CameraIntrinsics,
                       max_distance: float = MAX_MARCH_DISTANCE) -> DepthImage:
    """Ray-march the terrain from an explicit camera pose.

    position is the pinhole center, r_wc maps camera-frame vectors (x right,
    y down, z forward) into world; pixel values are z-depth in meters.
    """
    position = np.asarray(position, dtype=np.float64)
    if position[2] <= float(field.sample(position[0], position[1])):
        raise ValueError("camera is at or below the terrain surface")
    dirs = _pixel_dirs(intr).reshape(-1, 3) @ r_wc.T
    origins = np.broadcast_to(position, dirs.shape)
    depth = _march(field, origins, dirs, max_distance)
    return DepthImage(depth.reshape(intr.height, intr.width).astype(np.float32))


def render_depth(field: Heightfield, camera_pos, camera_rpy, intr: CameraIntrinsics,
                 max_distance: float = MAX_MARCH_DISTANCE) -> DepthImage:
    """Render clean depth from a camera pose given as (position, roll-pitch-yaw)."""
    r_wc = rpy_matrix(*camera_rpy) @ _CAMERA_BASIS
    return render_from_matrix(field, np.asarray(camera_pos, dtype=np.float64), r_wc,
                              intr, max_distance)


def sample_rig(nominal: StereoRig, rng: RngStream) -> StereoRig:
    """Apply the startup-stage calibration randomization to a rig.

    One draw per environment lifetime: horizontal/vertical focal scales,
    a shared mount position offset and a shared mount orientation offset
    (the stereo module is rigid, so both cameras move together).
    """
    u = rng.uniform("rig", 0, size=8)
    sh = FOCAL_SCALE_RANGE[0] + (FOCAL_SCALE_RANGE[1] - FOCAL_SCALE_RANGE[0]) * u[0]
    sv = FOCAL_SCALE_RANGE[0] + (FOCAL_SCALE_RANGE[1] - FOCAL_SCALE_RANGE[0]) * u[1]
    dp = tuple(MOUNT_POS_OFFSET * (2.0 * u[2:5] - 1.0))
    dtheta = tuple(MOUNT_ROT_OFFSET * (2.0 * u[5:8] - 1.0))

    def scaled(intr: CameraIntrinsics) -> CameraIntrinsics:
        return replace(intr, fx=intr.fx * sh, fy=intr.fy * sv)

    ext = CameraExtrinsics(dp=dp, dtheta=dtheta)
    return replace(nominal, left=scaled(nominal.left), right=scaled(nominal.right),
                   left_ext=ext, right_ext=ext)


def mount_frame(base_pos, base_rpy, rig: StereoRig) -> tuple[np.ndarray, np.ndarray]:
    """World pose of the (perturbed) rig center given the robot base pose."""
    base_pos = np.asarray(base_pos, dtype=np.float64)
    r_base = rpy_matrix(*base_rpy)
    r_mount_nom = r_base @ rpy_matrix(*rig.mount_rpy)
    r_mount = r_mount_nom @ rpy_matrix(*rig.left_ext.dtheta)
    pos = base_pos + r_base @ np.asarray(rig.mount_pos) + r_mount_nom @ np.asarray(rig.left_ext.dp)
    return pos, r_mount


def render_stereo(field: Heightfield, base_pos, base_rpy, rig: StereoRig,
                  max_distance: float = MAX_MARCH_DISTANCE) -> tuple[DepthImage, DepthImage]:
    """Render the left/right clean depth pair from a robot base pose.

    Cameras sit at -+baseline/2 along the rig's camera-x axis (left camera on
    the robot's left). Both eyes march in one batch; the result is identical
    to two independent renders. Deterministic for a fixed (field, pose, rig).
    """
    center, r_mount = mount_frame(base_pos, base_rpy, rig)
    r_wc = r_mount @ _CAMERA_BASIS
    x_cam_world = r_wc[:, 0]
    half = 0.5 * rig.baseline
    eye_l = center - half * x_cam_world
    eye_r = center + half * x_cam_world
    for eye in (eye_l, eye_r):
        if eye[2] <= float(field.sample(eye[0], eye[1])):
            raise ValueError("camera is at or below the terrain surface")

    dirs_l = _pixel_dirs(rig.left).reshape(-1, 3) @ r_wc.T
    dirs_r = _pixel_dirs(rig.right).reshape(-1, 3) @ r_wc.T
    n = dirs_l.shape[0]
    dirs = np.concatenate([dirs_l, dirs_r])
    origins = np.concatenate([np.broadcast_to(eye_l, dirs_l.shape),
                              np.broadcast_to(eye_r, dirs_r.shape)])
    depth = _march(field, origins, dirs, max_distance)
    h, w = rig.left.height, rig.left.width
    left = DepthImage(depth[:n].reshape(h, w).astype(np.float32))
    right = DepthImage(depth[n:].reshape(h, w).astype(np.float32))
    return left, right
