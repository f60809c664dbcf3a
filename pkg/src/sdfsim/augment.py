"""The eight-operator depth sensor realism pipeline.

Stage order (fixed): stereo fusion -> random convolution -> gaussian noise ->
perlin noise -> scale randomization -> pixel failures -> clip/normalize ->
crop, followed by an observation delay buffer. Per-frame parameters are
resampled every frame from tagged counter-based streams; startup parameters
(observation delay, rig calibration) are fixed per environment.

Sentinel discipline: 0.0 pixels are invalid. Only stereo fusion and pixel
failures may invalidate a pixel; no stage ever revives one. Noise stages
leave invalid pixels untouched, and noisy values pushed to or below zero are
clamped to MIN_VALID_DEPTH so they stay distinguishable from the sentinel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .camera import DepthImage, StereoRig
from .noise import PerlinField
from .rng import RngStream

MIN_VALID_DEPTH = 1e-4
REPROJECTION_EPS = 1e-6

TAU_RANGE = (0.05, 0.20)
CONV_WEIGHT_RANGE = (-0.05, 0.05)
GAUSS_COEFF_RANGE = (-0.03, 0.03)
PERLIN_COEFF_RANGE = (-0.02, 0.02)
SCALE_RANGE = (0.90, 1.10)
P_ZERO = 0.001
P_MAX = 0.001
CLIP_RANGE = (0.3, 2.0)
CROP_MARGINS = (3, 3, 4, 4)  # top, bottom, left, right
DELAY_RANGE = (2, 4)
DELAY_CAPACITY = 5

STAGE_NAMES = (
    "stereo_fusion",
    "random_conv",
    "gaussian_noise",
    "perlin_noise",
    "scale",
    "zero_failures",
    "max_failures",
    "clip_crop",
)


@dataclass(frozen=True)
class AugmentParams:
    """Complete randomization state for one environment at one frame."""

    tau: float
    conv_w: np.ndarray
    gauss_coeffs: np.ndarray
    perlin_coeffs: np.ndarray
    scale: float
    d_frame: int
    p_zero: float = P_ZERO
    p_max: float = P_MAX
    clip: tuple[float, float] = CLIP_RANGE
    crop: tuple[int, int, int, int] = CROP_MARGINS

    def __post_init__(self):
        if not TAU_RANGE[0] <= self.tau <= TAU_RANGE[1]:
            raise ValueError(f"tau {self.tau} outside {TAU_RANGE}")
        if np.max(np.abs(self.conv_w)) > CONV_WEIGHT_RANGE[1] + 1e-12:
            raise ValueError("convolution weights outside range")
        if np.max(np.abs(self.gauss_coeffs)) > GAUSS_COEFF_RANGE[1] + 1e-12:
            raise ValueError("gaussian coefficients outside range")
        if np.max(np.abs(self.perlin_coeffs)) > PERLIN_COEFF_RANGE[1] + 1e-12:
            raise ValueError("perlin coefficients outside range")
        if not SCALE_RANGE[0] <= self.scale <= SCALE_RANGE[1]:
            raise ValueError(f"scale {self.scale} outside {SCALE_RANGE}")
        if not DELAY_RANGE[0] <= self.d_frame <= DELAY_RANGE[1]:
            raise ValueError(f"d_frame {self.d_frame} outside {DELAY_RANGE}")


def sample_delay(rng: RngStream) -> int:
    """Startup-stage observation delay, uniform over {2, 3, 4} frames."""
    return int(rng.integers("delay", 0, DELAY_RANGE[0], DELAY_RANGE[1]))


def sample_params(rng: RngStream, frame: int) -> AugmentParams:
    """Draw the per-frame randomization for one environment.

    The delay is tagged to frame 0 so it stays fixed for the environment's
    lifetime; everything else is resampled each frame.
    """
    return AugmentParams(
        tau=rng.uniform("tau", frame, *TAU_RANGE),
        conv_w=np.asarray(rng.uniform("conv", frame, *CONV_WEIGHT_RANGE, size=9)).reshape(3, 3),
        gauss_coeffs=np.asarray(rng.uniform("gauss", frame, *GAUSS_COEFF_RANGE, size=3)),
        perlin_coeffs=np.asarray(rng.uniform("perlin", frame, *PERLIN_COEFF_RANGE, size=3)),
        scale=rng.uniform("scale", frame, *SCALE_RANGE),
        d_frame=sample_delay(rng),
    )


# ---------------------------------------------------------------------------
# operators


def stereo_fuse(left: DepthImage, right: DepthImage, fx: float, baseline: float,
                tau: float) -> DepthImage:
    """Disparity-consistency fusion of a stereo depth pair.

    Each left pixel reprojects into the right image at u - fx*b/depth; the
    right depth is linearly interpolated along the row and the pixel survives
    only when |d_left - d_right| < tau * d_left. Reprojections that leave the
    image or land on invalid neighbors fail the check.
    """
    if left.data.shape != right.data.shape:
        raise ValueError("stereo pair dimensions differ")
    if baseline < 0:
        raise ValueError("baseline must be non-negative")
    d_l = left.data.astype(np.float64)
    d_r = right.data.astype(np.float64)
    h, w = d_l.shape
    valid_l = d_l > 0.0

    u = np.arange(w, dtype=np.float64)[None, :]
    u_r = u - fx * baseline / (d_l + REPROJECTION_EPS)
    in_img = (u_r >= 0.0) & (u_r <= w - 1)

    j0 = np.clip(np.floor(u_r).astype(np.int64), 0, w - 1)
    j1 = np.minimum(j0 + 1, w - 1)
    t = np.clip(u_r - j0, 0.0, 1.0)
    rows = np.arange(h)[:, None]
    r0 = d_r[rows, j0]
    r1 = d_r[rows, j1]
    neighbors_ok = (r0 > 0.0) & ((t == 0.0) | (r1 > 0.0))
    d_right = r0 * (1.0 - t) + r1 * t

    consistent = np.abs(d_l - d_right) < tau * d_l
    keep = valid_l & in_img & neighbors_ok & consistent
    return DepthImage(np.where(keep, d_l, 0.0))


def random_conv(img: DepthImage, conv_w: np.ndarray) -> DepthImage:
    """Convolve with (W + identity); replicated borders, hole-aware.

    Invalid pixels pass through unchanged and do not contribute to neighbors;
    the remaining weights are rescaled so a constant field always maps to
    value * (1 + sum(W)) regardless of the hole pattern.
    """
    conv_w = np.asarray(conv_w, dtype=np.float64)
    if conv_w.shape != (3, 3):
        raise ValueError("kernel must be 3x3")
    if np.max(np.abs(conv_w)) > CONV_WEIGHT_RANGE[1] + 1e-12:
        raise ValueError("kernel weights outside range")
    kernel = conv_w.copy()
    kernel[1, 1] += 1.0
    total = kernel.sum()

    data = img.data.astype(np.float64)
    mask = (data > 0.0).astype(np.float64)
    h, w = data.shape
    pd = np.pad(data * mask, 1, mode="edge")
    pm = np.pad(mask, 1, mode="edge")

    acc = np.zeros((h, w))
    wsum = np.zeros((h, w))
    for di in range(3):
        for dj in range(3):
            acc += kernel[di, dj] * pd[di : di + h, dj : dj + w]
            wsum += kernel[di, dj] * pm[di : di + h, dj : dj + w]
    # wsum >= 1 - 9*0.05 when the center is valid, so division is safe
    out = np.where(mask > 0, acc * total / np.where(wsum != 0, wsum, 1.0), 0.0)
    return DepthImage(np.maximum(out, MIN_VALID_DEPTH) * (mask > 0))


def _amplitude(depth: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    c0, c1, c2 = np.asarray(coeffs, dtype=np.float64)
    return np.abs(c0 + c1 * depth + c2 * depth * depth)


def gaussian_noise(img: DepthImage, coeffs: np.ndarray, rng: RngStream,
                   frame: int) -> DepthImage:
    """Additive zero-mean noise with depth-quadratic amplitude on valid pixels."""
    data = img.data.astype(np.float64)
    mask = data > 0.0
    n = np.asarray(rng.normal("gauss.pixels", frame, size=data.size)).reshape(data.shape)
    noisy = data + _amplitude(data, coeffs) * n
    out = np.where(mask, np.maximum(noisy, MIN_VALID_DEPTH), 0.0)
    return DepthImage(out)


def perlin_noise(img: DepthImage, coeffs: np.ndarray, field_values: np.ndarray) -> DepthImage:
    """Add a structured noise field with depth-quadratic amplitude."""
    data = img.data.astype(np.float64)
    if field_values.shape != data.shape:
        raise ValueError("noise field dimensions must match the image")
    mask = data > 0.0
    noisy = data + _amplitude(data, coeffs) * field_values.astype(np.float64)
    out = np.where(mask, np.maximum(noisy, MIN_VALID_DEPTH), 0.0)
    return DepthImage(out)


def scale_depth(img: DepthImage, scale: float) -> DepthImage:
    """Multiply valid depths by a calibration-drift factor."""
    if not SCALE_RANGE[0] <= scale <= SCALE_RANGE[1]:
        raise ValueError(f"scale {scale} outside {SCALE_RANGE}")
    data = img.data.astype(np.float64)
    return DepthImage(np.where(data > 0.0, data * scale, 0.0))


def pixel_failure_stages(img: DepthImage, p_zero: float, p_max: float, d_max: float,
                         rng: RngStream, frame: int) -> tuple[DepthImage, DepthImage]:
    """Dead then saturated pixels from a single per-pixel uniform draw.

    Returns (after zeroing, after saturation); the second is the stage output.
    Already-invalid pixels are never revived.
    """
    if not (0.0 <= p_zero <= 1.0 and 0.0 <= p_max <= 1.0):
        raise ValueError("failure probabilities must be in [0, 1]")
    data = img.data.astype(np.float64)
    mask = data > 0.0
    u = np.asarray(rng.uniform("failures", frame, size=data.size)).reshape(data.shape)
    zeroed = np.where(mask & (u < p_zero), 0.0, data)
    saturated = np.where(mask & (u >= p_zero) & (u < p_zero + p_max), d_max, zeroed)
    return DepthImage(zeroed), DepthImage(saturated)


def pixel_failures(img: DepthImage, p_zero: float, p_max: float, d_max: float,
                   rng: RngStream, frame: int) -> DepthImage:
    return pixel_failure_stages(img, p_zero, p_max, d_max, rng, frame)[1]


def clip_normalize(img: DepthImage, d_min: float = CLIP_RANGE[0],
                   d_max: float = CLIP_RANGE[1]) -> DepthImage:
    """Clamp valid depths to [d_min, d_max] and map affinely onto [0, 1].

    Invalid pixels map to 0.0, which after this stage is indistinguishable
    from a valid reading at d_min.
    """
    if d_min >= d_max:
        raise ValueError("d_min must be below d_max")
    lo = np.float32(d_min)
    hi = np.float32(d_max)
    data = img.data
    mask = data > 0.0
    normed = (np.clip(data, lo, hi) - lo) / (hi - lo)
    return DepthImage(np.where(mask, normed, np.float32(0.0)))


def crop(img: DepthImage, top: int = CROP_MARGINS[0], bottom: int = CROP_MARGINS[1],
         left: int = CROP_MARGINS[2], right: int = CROP_MARGINS[3]) -> DepthImage:
    """Trim fixed margins; output (i, j) = input (i + top, j + left)."""
    h, w = img.data.shape
    if h < top + bottom + 1 or w < left + right + 1:
        raise ValueError("image too small for requested crop")
    return DepthImage(img.data[top : h - bottom, left : w - right])


# ---------------------------------------------------------------------------
# per-environment state and pipeline composition


class DelayBuffer:
    """Ring of recently processed frames emulating pipeline latency.

    Once warm (d_frame + 1 entries buffered) the emitted frame is the one
    processed d_frame pushes ago; before that the oldest available frame is
    emitted.
    """

    def __init__(self, d_frame: int, capacity: int = DELAY_CAPACITY):
        if not DELAY_RANGE[0] <= d_frame <= DELAY_RANGE[1]:
            raise ValueError(f"d_frame {d_frame} outside {DELAY_RANGE}")
        self.d_frame = d_frame
        self._ring: deque[DepthImage] = deque(maxlen=capacity)

    def push(self, img: DepthImage) -> DepthImage:
        self._ring.append(img)
        if len(self._ring) > self.d_frame:
            return self._ring[-1 - self.d_frame]
        return self._ring[0]


@dataclass
class PipelineToggles:
    stereo_fusion: bool = True
    random_conv: bool = True
    gaussian_noise: bool = True
    perlin_noise: bool = True
    scale: bool = True
    pixel_failures: bool = True
    clip: bool = True
    crop: bool = True


@dataclass
class EnvState:
    """Mutable per-environment pipeline state; never shared across envs."""

    env_id: int
    stream: RngStream
    rig: StereoRig
    delay: DelayBuffer = field(init=False)

    def __post_init__(self):
        self.delay = DelayBuffer(sample_delay(self.stream))


def augment_frame(state: EnvState, frame: int, left: DepthImage, right: DepthImage,
                  toggles: PipelineToggles | None = None,
                  capture: dict | None = None,
                  timers: dict | None = None) -> tuple[DepthImage, DepthImage]:
    """Run the full pipeline for one environment frame.

    Returns (student observation, clean counterpart). The student path is the
    delayed, fully augmented image; the clean path is the left render with
    clip/normalize and crop only.
    """
    tog = toggles or PipelineToggles()
    params = sample_params(state.stream, frame)

    def timed(name, fn):
        if timers is None:
            out = fn()
        else:
            t0 = perf_counter()
            out = fn()
            timers[name] = timers.get(name, 0.0) + (perf_counter() - t0)
        if capture is not None and name in STAGE_NAMES:
            capture[name] = out
        return out

    img = left
    if tog.stereo_fusion:
        img = timed("stereo_fusion", lambda: stereo_fuse(
            left, right, state.rig.left.fx, state.rig.baseline, params.tau))
    if tog.random_conv:
        img = timed("random_conv", lambda i=img: random_conv(i, params.conv_w))
    if tog.gaussian_noise:
        img = timed("gaussian_noise", lambda i=img: gaussian_noise(
            i, params.gauss_coeffs, state.stream, frame))
    if tog.perlin_noise:
        def _perlin(i=img):
            fld = PerlinField(state.stream, frame, i.height, i.width)
            return perlin_noise(i, params.perlin_coeffs, fld.values)
        img = timed("perlin_noise", _perlin)
    if tog.scale:
        img = timed("scale", lambda i=img: scale_depth(i, params.scale))
    if tog.pixel_failures:
        def _failures(i=img):
            zeroed, saturated = pixel_failure_stages(
                i, params.p_zero, params.p_max, params.clip[1], state.stream, frame)
            if capture is not None:
                capture["zero_failures"] = zeroed
            return saturated
        img = timed("max_failures", _failures)
    if tog.clip:
        img = timed("clip", lambda i=img: clip_normalize(i, *params.clip))
    if tog.crop:
        img = timed("crop", lambda i=img: crop(i, *params.crop))
    if capture is not None:
        capture["clip_crop"] = img

    def _delay(i=img):
        return state.delay.push(i)

    student = timed("delay", _delay)

    def _clean():
        c = left
        if tog.clip:
            c = clip_normalize(c, *params.clip)
        if tog.crop:
            c = crop(c, *params.crop)
        return c

    clean = timed("clean_branch", _clean)
    return student, clean


def process_batch(states: list[EnvState], frame: int, lefts, rights,
                  toggles: PipelineToggles | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run one frame over a batch of environments from clean stereo pairs.

    lefts/rights are (N, H, W) stacks (or sequences of DepthImage). Returns
    contiguous float32 (N, 1, 24, 32) tensors, env-major and row-major within
    each image, for the student and clean branches. Environments are fully
    independent; results never depend on processing order.
    """
    n = len(states)
    if len(lefts) != n or len(rights) != n:
        raise ValueError("batch size mismatch between states and image stacks")
    student_out = None
    clean_out = None
    for i, state in enumerate(states):
        left = lefts[i] if isinstance(lefts[i], DepthImage) else DepthImage(lefts[i])
        right = rights[i] if isinstance(rights[i], DepthImage) else DepthImage(rights[i])
        student, clean = augment_frame(state, frame, left, right, toggles=toggles)
        if student_out is None:
            student_out = np.empty((n, 1) + student.data.shape, dtype=np.float32)
            clean_out = np.empty((n, 1) + clean.data.shape, dtype=np.float32)
        student_out[i, 0] = student.data
        clean_out[i, 0] = clean.data
    return student_out, clean_out
