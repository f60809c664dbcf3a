"""Numeric kernels for the learning stack.

Covers head routing for terrain-specialized critics/discriminators, the
torso-centric discriminator observation vector, terrain-specific rewards,
the three distillation losses, and the power / power-degradation metrics.
Everything here is a pure function over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import quat_multiply, quat_conjugate, quat_normalize, quat_rotate_inverse
from .terrain import TerrainCategory

LAMBDA_DENOISE = 0.1
LAMBDA_KL = 0.1
KL_EPSILON = 1e-5

REWARD_VEL_EXP = "vel_exp"
REWARD_VEL_DIR = "vel_dir"
REWARD_CONTACT = "contact"

# which rewards apply on which terrain category
_APPLICABILITY = {
    TerrainCategory.STAIRS_PLATFORMS: frozenset({REWARD_VEL_EXP, REWARD_CONTACT}),
    TerrainCategory.GAP_CROSSING: frozenset({REWARD_VEL_DIR}),
    TerrainCategory.ROUGH: frozenset({REWARD_VEL_EXP}),
}


@dataclass(frozen=True)
class RewardConfig:
    sigma: float = 0.5
    epsilon: float = 1e-6
    h_max: float = 0.2
    weights: dict = field(default_factory=lambda: {
        REWARD_VEL_EXP: 1.0,
        REWARD_VEL_DIR: 1.0,
        REWARD_CONTACT: -1.0,
    })

    def __post_init__(self):
        if self.sigma <= 0 or self.epsilon <= 0 or self.h_max <= 0:
            raise ValueError("sigma, epsilon and h_max must be positive")


def route(category: TerrainCategory, heads) -> float:
    """Select the head matching the terrain label; used for critics and
    discriminators alike."""
    heads = np.asarray(heads, dtype=np.float64)
    if heads.shape[-1] != 3:
        raise ValueError("expected exactly 3 heads")
    return float(heads[..., category.value - 1])


def applicable_rewards(category: TerrainCategory) -> frozenset:
    return _APPLICABILITY[category]


def amp_features(joint_pos, joint_vel, torso_pos, torso_quat, lin_vel_w, ang_vel_w,
                 body_pos_w, body_quat_w, gravity_w=(0.0, 0.0, -1.0)) -> np.ndarray:
    """Assemble the torso-centric discriminator observation vector.

    Concatenation order: joint positions, joint velocities, base linear
    velocity (body frame), base angular velocity (body frame), gravity
    direction (body frame), key-body positions (body frame, row-flattened),
    key-body orientations (body-relative unit quaternions, row-flattened).
    Quaternions are scalar-first (w, x, y, z).
    """
    torso_quat = quat_normalize(np.asarray(torso_quat, dtype=np.float64))
    v_b = quat_rotate_inverse(torso_quat, np.asarray(lin_vel_w, dtype=np.float64))
    w_b = quat_rotate_inverse(torso_quat, np.asarray(ang_vel_w, dtype=np.float64))
    g = np.asarray(gravity_w, dtype=np.float64)
    g_b = quat_rotate_inverse(torso_quat, g / np.linalg.norm(g))

    body_pos_w = np.atleast_2d(np.asarray(body_pos_w, dtype=np.float64))
    rel = body_pos_w - np.asarray(torso_pos, dtype=np.float64)[None, :]
    p_b = quat_rotate_inverse(torso_quat, rel)

    body_quat_w = np.atleast_2d(np.asarray(body_quat_w, dtype=np.float64))
    q_b = quat_normalize(quat_multiply(quat_conjugate(torso_quat)[None, :], body_quat_w))

    return np.concatenate([
        np.asarray(joint_pos, dtype=np.float64).ravel(),
        np.asarray(joint_vel, dtype=np.float64).ravel(),
        v_b.ravel(),
        w_b.ravel(),
        g_b.ravel(),
        p_b.ravel(),
        q_b.ravel(),
    ])


# ---------------------------------------------------------------------------
# terrain-specific rewards


def reward_vel_exp(v_cmd, v_robot, sigma: float) -> float:
    """Exponential tracking kernel over planar velocity error; in (0, 1]."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    err = np.asarray(v_cmd, dtype=np.float64) - np.asarray(v_robot, dtype=np.float64)
    return float(np.exp(-np.dot(err, err) / (sigma * sigma)))


def reward_vel_dir(v_cmd, v_robot, epsilon: float) -> float:
    """Directional tracking: speed along the command direction, capped at the
    command magnitude, so overspeed is never penalized."""
    v_cmd = np.asarray(v_cmd, dtype=np.float64)
    v_robot = np.asarray(v_robot, dtype=np.float64)
    cmd_norm = float(np.linalg.norm(v_cmd))
    if cmd_norm <= 0:
        raise ValueError("command velocity must be non-zero")
    along = float(np.dot(v_robot, v_cmd / cmd_norm))
    return min(along, cmd_norm) / (cmd_norm + epsilon)


def reward_contact(foot_scans, contact_flags, h_max: float) -> float:
    """Surface-irregularity penalty term: per contacting foot, the population
    std of its height samples clipped to [-h_max, h_max], summed over feet."""
    if h_max <= 0:
        raise ValueError("h_max must be positive")
    total = 0.0
    for scan, in_contact in zip(foot_scans, contact_flags):
        if not in_contact:
            continue
        clipped = np.clip(np.asarray(scan, dtype=np.float64), -h_max, h_max)
        total += float(np.std(clipped))
    return total


# ---------------------------------------------------------------------------
# distillation losses


def behavior_loss(mu_deploy, mu_priv) -> float:
    """Mean squared action discrepancy between deployment and privileged policies."""
    a = np.asarray(mu_deploy, dtype=np.float64)
    b = np.asarray(mu_priv, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("policy mean shapes differ")
    diff = a - b
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def denoise_loss(z_clean, z_aug) -> float:
    """Mean squared distance between paired clean/augmented latent rows."""
    a = np.asarray(z_clean, dtype=np.float64)
    b = np.asarray(z_aug, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("latent batch shapes differ")
    diff = a - b
    return float(np.mean(np.sum(diff * diff, axis=-1)))


def kl_loss(z, epsilon: float = KL_EPSILON) -> float:
    """Divergence of the batch-wise latent distribution from a unit normal.

    Per-dimension moments are population statistics over the batch axis with
    epsilon added to the variance for stability; the per-dimension closed-form
    divergences are summed over the feature axis.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("need an (N, D) batch with N >= 2")
    if not np.all(np.isfinite(z)):
        raise ValueError("latent batch contains non-finite values")
    mu = z.mean(axis=0)
    var = z.var(axis=0) + epsilon
    if np.any(var <= 0):
        raise ValueError("degenerate variance; increase epsilon")
    per_dim = 0.5 * (var + mu * mu - 1.0 - np.log(var))
    return float(per_dim.sum())


def total_loss(behavior: float, denoise: float, kl: float,
               lambda_denoise: float = LAMBDA_DENOISE,
               lambda_kl: float = LAMBDA_KL) -> float:
    return float(behavior + lambda_denoise * denoise + lambda_kl * kl)


# ---------------------------------------------------------------------------
# evaluation metrics


def avg_power(torques, joint_velocities) -> float:
    """Mean over steps of the L2 norm of elementwise torque * velocity (watts)."""
    tau = np.atleast_2d(np.asarray(torques, dtype=np.float64))
    qd = np.atleast_2d(np.asarray(joint_velocities, dtype=np.float64))
    if tau.shape != qd.shape:
        raise ValueError("torque and velocity traces must align")
    if tau.shape[0] < 1:
        raise ValueError("need at least one step")
    return float(np.mean(np.linalg.norm(tau * qd, axis=1)))


def pdr(p_noisy: float, p_clean: float) -> float:
    """Relative power increase under realistic sensing, in percent."""
    if p_clean <= 0:
        raise ValueError("clean power must be positive")
    return (p_noisy - p_clean) / p_clean * 100.0
