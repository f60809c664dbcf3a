"""Batched render + augment engine.

A Session owns N independent environments over one terrain: each environment
has its own counter-based stream, startup-sampled stereo rig and delay
buffer. step() renders the stereo pair per environment and runs the full
augmentation pipeline, returning contiguous (N, 1, H, W) float32 tensors
(env-major, row-major within each image) for the student and clean branches.

Environments are embarrassingly parallel: the worker pool only chunks the
environment axis, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .augment import EnvState, PipelineToggles, augment_frame
from .camera import StereoRig, default_rig, render_stereo, sample_rig
from .config import RunConfig
from .rng import RngStream
from .terrain import Heightfield, make_terrain

LATERAL_SLOTS = 5
LATERAL_STEP = 0.05


@dataclass
class StepOutput:
    student: np.ndarray
    clean: np.ndarray


class Session:
    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.terrain: Heightfield = make_terrain(config.terrain_spec())
        nominal = default_rig(
            width=config.image_width, height=config.image_height,
            fx=config.focal_x, fy=config.focal_y, baseline=config.baseline,
            mount_pos=(config.mount_forward, 0.0, config.mount_height),
            mount_rpy=(0.0, config.mount_pitch, 0.0),
        )
        self.nominal_rig: StereoRig = nominal
        self.envs: list[EnvState] = []
        for env_id in range(config.env_count):
            stream = RngStream(config.master_seed, env_id)
            self.envs.append(EnvState(env_id=env_id, stream=stream,
                                      rig=sample_rig(nominal, stream)))
        self.toggles = PipelineToggles(
            stereo_fusion=config.stereo_fusion, random_conv=config.random_conv,
            gaussian_noise=config.gaussian_noise, perlin_noise=config.perlin_noise,
            scale=config.scale, pixel_failures=config.pixel_failures,
            clip=config.clip, crop=config.crop,
        )
        self.frame = 0
        self.stage_seconds: dict[str, float] = {}
        top, bottom, left, right = (3, 3, 4, 4)
        self.out_height = config.image_height - (top + bottom) if config.crop else config.image_height
        self.out_width = config.image_width - (left + right) if config.crop else config.image_width

    # -- poses -----------------------------------------------------------------

    def default_pose(self, frame: int, env_id: int) -> tuple[float, float, float, float]:
        """Deterministic walk-forward trajectory used when no poses are supplied."""
        cfg = self.config
        x = cfg.start_x + cfg.walk_speed * cfg.frame_dt * frame
        x = min(x, self.terrain.length - 1.0)
        slot = (env_id % LATERAL_SLOTS) - LATERAL_SLOTS // 2
        y = self.terrain.width / 2.0 + slot * LATERAL_STEP
        z = float(self.terrain.sample(x, y)) + cfg.base_height
        return (x, y, 0.0, z)

    # -- stepping ----------------------------------------------------------------

    def _step_env(self, env: EnvState, frame: int, pose, capture=None):
        timers: dict[str, float] = {}
        x, y, yaw, z = pose
        t0 = perf_counter()
        left, right = render_stereo(self.terrain, (x, y, z), (0.0, 0.0, yaw), env.rig,
                                    max_distance=self.config.max_range)
        timers["render"] = perf_counter() - t0
        if capture is not None:
            capture["input_left"] = left
            capture["input_right"] = right
        student, clean = augment_frame(env, frame, left, right, toggles=self.toggles,
                                       capture=capture, timers=timers)
        return student.data, clean.data, timers

    def step(self, poses=None, capture_env: int | None = None,
             capture: dict | None = None) -> StepOutput:
        """Advance every environment by one frame.

        poses: optional (N, 4) array of (x, y, yaw, z) base poses; defaults to
        the built-in trajectory. capture gathers per-stage images for
        capture_env when provided.
        """
        n = len(self.envs)
        frame = self.frame
        if poses is None:
            poses = [self.default_pose(frame, e.env_id) for e in self.envs]
        else:
            poses = np.asarray(poses, dtype=np.float64)
            if poses.shape != (n, 4):
                raise ValueError(f"poses must have shape ({n}, 4)")

        student = np.empty((n, 1, self.out_height, self.out_width), dtype=np.float32)
        clean = np.empty_like(student)

        def run(i: int):
            cap = capture if (capture is not None and i == capture_env) else None
            return i, self._step_env(self.envs[i], frame, poses[i], cap)

        if self.config.workers == 1:
            results = map(run, range(n))
        else:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                results = list(pool.map(run, range(n)))

        for i, (s, c, timers) in results:
            student[i, 0] = s
            clean[i, 0] = c
            for name, dt in timers.items():
                self.stage_seconds[name] = self.stage_seconds.get(name, 0.0) + dt

        self.frame += 1
        return StepOutput(student=student, clean=clean)

    def run(self, frames: int) -> tuple[np.ndarray, np.ndarray]:
        """Run `frames` steps; returns (F, N, 1, H, W) student and clean tensors."""
        n = len(self.envs)
        student = np.empty((frames, n, 1, self.out_height, self.out_width), dtype=np.float32)
        clean = np.empty_like(student)
        for f in range(frames):
            out = self.step()
            student[f] = out.student
            clean[f] = out.clean
        return student, clean


def run_digest(config: RunConfig, frames: int | None = None) -> str:
    """SHA-256 over the student+clean tensors of a fresh run (determinism probe)."""
    session = Session(config)
    student, clean = session.run(frames or config.frame_count)
    h = hashlib.sha256()
    h.update(student.tobytes())
    h.update(clean.tobytes())
    return h.hexdigest()
