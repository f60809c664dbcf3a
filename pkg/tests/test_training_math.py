from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.spatial.transform import Rotation
from scipy.stats import norm

from sdfsim.terrain import TerrainCategory
from sdfsim.training_math import (REWARD_CONTACT, REWARD_VEL_DIR, REWARD_VEL_EXP,
                                  RewardConfig, amp_features, applicable_rewards,
                                  avg_power, behavior_loss, denoise_loss, kl_loss,
                                  pdr, reward_contact, reward_vel_dir, reward_vel_exp,
                                  route, total_loss)


# ---------------------------------------------------------------------------
# routing


def test_route_selects_by_category():
    heads = (0.1, 0.7, -0.3)
    assert route(TerrainCategory.GAP_CROSSING, heads) == 0.7
    assert route(TerrainCategory.STAIRS_PLATFORMS, heads) == 0.1
    assert route(TerrainCategory.ROUGH, heads) == -0.3


def test_route_ignores_other_heads():
    rng = np.random.default_rng(0)
    for category in TerrainCategory:
        k = category.value - 1
        base = rng.normal(size=3)
        ref = route(category, base)
        for _ in range(10):
            perturbed = base.copy()
            others = [i for i in range(3) if i != k]
            perturbed[others] = rng.normal(size=2)
            assert route(category, perturbed) == ref


def test_route_permutation_of_unselected_heads():
    import itertools

    heads = np.array([1.0, 2.0, 3.0])
    for category in TerrainCategory:
        k = category.value - 1
        ref = route(category, heads)
        for perm in itertools.permutations(range(3)):
            if perm[k] != k:
                continue
            assert route(category, heads[list(perm)]) == ref


# ---------------------------------------------------------------------------
# amp features


def test_amp_identity_orientation_passthrough():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    vec = amp_features(joint_pos=[0.1, -0.2], joint_vel=[0.0, 0.0],
                       torso_pos=[0.0, 0.0, 1.0], torso_quat=q,
                       lin_vel_w=[1.0, 0.0, 0.0], ang_vel_w=[0.0, 0.5, 0.0],
                       body_pos_w=[[0.1, 0.0, 0.8]], body_quat_w=[[1.0, 0, 0, 0]])
    assert np.allclose(vec[:2], [0.1, -0.2])
    assert np.allclose(vec[2:4], [0.0, 0.0])
    assert np.allclose(vec[4:7], [1.0, 0.0, 0.0])
    assert np.allclose(vec[7:10], [0.0, 0.5, 0.0])
    assert np.allclose(vec[10:13], [0.0, 0.0, -1.0])   # gravity direction
    assert np.allclose(vec[13:16], [0.1, 0.0, -0.2])   # body position relative to torso
    assert np.allclose(vec[16:20], [1.0, 0.0, 0.0, 0.0])


def test_amp_gravity_rotation_against_reference():
    # pitch the torso 90 degrees nose-down and compare with scipy
    for rpy in [(0.0, np.pi / 2, 0.0), (0.3, -0.4, 1.1), (np.pi / 3, 0.2, -2.0)]:
        rot = Rotation.from_euler("ZYX", [rpy[2], rpy[1], rpy[0]])
        q_xyzw = rot.as_quat()
        q = np.array([q_xyzw[3], *q_xyzw[:3]])
        vec = amp_features(joint_pos=[], joint_vel=[], torso_pos=[0, 0, 1], torso_quat=q,
                           lin_vel_w=[0.7, -0.1, 0.2], ang_vel_w=[0, 0, 0],
                           body_pos_w=np.zeros((0, 3)), body_quat_w=np.zeros((0, 4)))
        g_b = vec[6:9]
        expected = rot.inv().apply([0.0, 0.0, -1.0])
        assert np.allclose(g_b, expected, atol=1e-9)
        assert np.linalg.norm(g_b) == pytest.approx(1.0, abs=1e-6)
        v_b = vec[0:3]
        assert np.allclose(v_b, rot.inv().apply([0.7, -0.1, 0.2]), atol=1e-9)


def test_amp_zero_joint_velocities_segment():
    vec = amp_features(joint_pos=np.ones(5), joint_vel=np.zeros(5),
                       torso_pos=[0, 0, 0], torso_quat=[1, 0, 0, 0],
                       lin_vel_w=[0, 0, 0], ang_vel_w=[0, 0, 0],
                       body_pos_w=np.zeros((2, 3)),
                       body_quat_w=np.tile([1.0, 0, 0, 0], (2, 1)))
    assert np.all(vec[5:10] == 0.0)
    assert vec.shape == (5 + 5 + 3 + 3 + 3 + 6 + 8,)


# ---------------------------------------------------------------------------
# rewards


def test_reward_vel_exp_values():
    assert reward_vel_exp([1.0, 0.0], [1.0, 0.0], sigma=0.5) == 1.0
    sigma = 0.5
    r = reward_vel_exp([1.0, 0.0], [1.0 - sigma, 0.0], sigma)
    assert r == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_reward_vel_exp_monotone_in_error():
    errs = np.linspace(0, 2, 25)
    rewards = [reward_vel_exp([1.0, 0.0], [1.0 - e, 0.0], 0.5) for e in errs]
    assert all(b < a for a, b in zip(rewards, rewards[1:]))
    assert all(0.0 < r <= 1.0 for r in rewards)


def test_reward_vel_dir_cap_and_orthogonal():
    eps = 1e-8
    v_cmd = [1.2, 0.0]
    exact = reward_vel_dir(v_cmd, [1.2, 0.0], eps)
    over = reward_vel_dir(v_cmd, [2.4, 0.0], eps)
    assert over == exact
    assert exact == pytest.approx(1.0, abs=1e-6)
    assert reward_vel_dir(v_cmd, [0.0, 3.0], eps) == 0.0
    with pytest.raises(ValueError):
        reward_vel_dir([0.0, 0.0], [1.0, 0.0], eps)


def test_reward_contact_cases():
    flat = reward_contact([[0.1, 0.1, 0.1], [0.2, 0.2]], [True, True], h_max=0.2)
    assert flat == pytest.approx(0.0, abs=1e-12)
    r = reward_contact([[-0.1, 0.1]], [True], h_max=0.2)
    assert r == pytest.approx(0.1, abs=1e-12)
    assert reward_contact([[-0.5, 0.9]], [False], h_max=0.2) == 0.0
    # clipping limits the contribution of extreme samples
    clipped = reward_contact([[-5.0, 5.0]], [True], h_max=0.2)
    assert clipped == pytest.approx(0.2, abs=1e-12)
    assert 0.0 <= clipped <= 2 * 0.2


def test_applicability_matrix():
    assert applicable_rewards(TerrainCategory.STAIRS_PLATFORMS) == {REWARD_VEL_EXP, REWARD_CONTACT}
    assert applicable_rewards(TerrainCategory.GAP_CROSSING) == {REWARD_VEL_DIR}
    assert applicable_rewards(TerrainCategory.ROUGH) == {REWARD_VEL_EXP}
    for category in TerrainCategory:
        rewards = applicable_rewards(category)
        assert rewards
        assert not ({REWARD_VEL_EXP, REWARD_VEL_DIR} <= rewards)


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(sigma=0.0)
    cfg = RewardConfig()
    assert cfg.weights[REWARD_CONTACT] < 0  # applied as a penalty


# ---------------------------------------------------------------------------
# distillation losses


def test_behavior_loss_cases():
    a = np.zeros((4, 3))
    assert behavior_loss(a, a) == 0.0
    mu_d = np.array([[3.0, 4.0]])
    mu_p = np.zeros((1, 2))
    assert behavior_loss(mu_d, mu_p) == 25.0


@given(st.integers(2, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_behavior_loss_permutation_invariant(n, a, seed):
    rng = np.random.default_rng(seed)
    mu_d = rng.normal(size=(n, a))
    mu_p = rng.normal(size=(n, a))
    perm = rng.permutation(n)
    assert behavior_loss(mu_d, mu_p) == pytest.approx(
        behavior_loss(mu_d[perm], mu_p[perm]), rel=1e-12)


def test_denoise_loss_cases():
    z = np.ones((5, 7))
    assert denoise_loss(z, z) == 0.0
    z2 = z.copy()
    z2[2, 3] += 1.0
    assert denoise_loss(z, z2) == pytest.approx(1.0 / 5.0, abs=1e-12)
    assert denoise_loss(z2, z) == denoise_loss(z, z2)


def _kl_quad_oracle(mu: float, var: float) -> float:
    sd = np.sqrt(var)
    f = lambda x: norm.pdf(x, mu, sd) * (norm.logpdf(x, mu, sd) - norm.logpdf(x, 0.0, 1.0))
    val, _ = quad(f, mu - 12 * sd - 12, mu + 12 * sd + 12, limit=200)
    return val


def _batch_with_moments(mus, variances) -> np.ndarray:
    # two rows mu +- sd realize the population moments exactly
    mus = np.asarray(mus, dtype=np.float64)
    sds = np.sqrt(np.asarray(variances, dtype=np.float64))
    return np.stack([mus + sds, mus - sds])


def test_kl_loss_prior_match_is_zero():
    z = _batch_with_moments([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    assert kl_loss(z, epsilon=0.0) == pytest.approx(0.0, abs=1e-12)


def test_kl_loss_unit_case():
    z = _batch_with_moments([1.0], [1.0])
    assert kl_loss(z, epsilon=0.0) == pytest.approx(0.5, abs=1e-12)


def test_kl_loss_matches_quadrature_oracle():
    rng = np.random.default_rng(42)
    for _ in range(50):
        mu = rng.uniform(-2.5, 2.5)
        var = rng.uniform(0.15, 4.0)
        ours = kl_loss(_batch_with_moments([mu], [var]), epsilon=0.0)
        assert abs(ours - _kl_quad_oracle(mu, var)) < 1e-6


def test_kl_loss_nonnegative_sweep():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        z = rng.normal(rng.uniform(-1, 1), rng.uniform(0.2, 2.0), size=(rng.integers(2, 9), 4))
        assert kl_loss(z) >= 0.0


def test_kl_loss_needs_batch():
    with pytest.raises(ValueError):
        kl_loss(np.ones((1, 4)))


@given(st.integers(2, 10), st.integers(1, 5), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_kl_loss_batch_permutation_invariant(n, d, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, d))
    assert kl_loss(z) == pytest.approx(kl_loss(z[rng.permutation(n)]), rel=1e-12)


def test_total_loss_weighting():
    assert total_loss(1.0, 0.0, 0.0) == 1.0
    assert total_loss(1.0, 1.0, 1.0) == pytest.approx(1.2, abs=1e-12)
    assert total_loss(0.7, 5.0, 3.0, lambda_denoise=0.0, lambda_kl=0.0) == 0.7


# ---------------------------------------------------------------------------
# metrics


def test_avg_power_cases():
    assert avg_power([[3.0, 0.0]], [[0.0, 0.0]]) == 0.0
    assert avg_power([[3.0, 0.0]], [[1.0, 4.0]]) == 3.0
    base = avg_power([[1.0, 2.0], [0.5, -1.0]], [[0.3, 0.1], [2.0, 1.0]])
    doubled = avg_power([[2.0, 4.0], [1.0, -2.0]], [[0.3, 0.1], [2.0, 1.0]])
    assert doubled == pytest.approx(2 * base, rel=1e-12)


def test_avg_power_joint_order_invariant():
    rng = np.random.default_rng(3)
    tau = rng.normal(size=(6, 5))
    qd = rng.normal(size=(6, 5))
    perm = rng.permutation(5)
    assert avg_power(tau, qd) == pytest.approx(avg_power(tau[:, perm], qd[:, perm]), rel=1e-12)


def test_pdr_values():
    assert pdr(10.0, 10.0) == 0.0
    assert pdr(32.4, 27.7) == pytest.approx(16.9675, abs=5e-3)
    assert pdr(25.0, 27.7) < 0.0
    with pytest.raises(ValueError):
        pdr(1.0, 0.0)
