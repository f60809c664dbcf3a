from __future__ import annotations

import numpy as np

from sdfsim.rng import RngStream


def test_draws_are_pure_functions_of_coordinates():
    s = RngStream(1234, 7)
    a = s.uniform("noise", 42, size=64)
    b = s.uniform("noise", 42, size=64)
    assert np.array_equal(a, b)
    assert np.array_equal(RngStream(1234, 7).uniform("noise", 42, size=64), a)


def test_distinct_tags_never_share_draws():
    s = RngStream(99, 0)
    a = s.uniform("gauss", 5, size=256)
    b = s.uniform("perlin", 5, size=256)
    assert not np.array_equal(a, b)


def test_distinct_envs_and_frames_differ():
    a = RngStream(5, 0).uniform("t", 0, size=32)
    assert not np.array_equal(a, RngStream(5, 1).uniform("t", 0, size=32))
    assert not np.array_equal(a, RngStream(5, 0).uniform("t", 1, size=32))
    assert not np.array_equal(a, RngStream(6, 0).uniform("t", 0, size=32))


def test_draw_index_segments_are_consistent():
    s = RngStream(11, 3)
    whole = s.uniform("u", 2, size=10)
    head = s.uniform("u", 2, size=4)
    tail = s.uniform("u", 2, size=6, start=4)
    assert np.array_equal(whole, np.concatenate([head, tail]))


def test_uniform_respects_bounds():
    s = RngStream(0, 0)
    u = s.uniform("b", 0, 0.05, 0.20, size=100_000)
    assert u.min() >= 0.05 and u.max() <= 0.20
    assert abs(u.mean() - 0.125) < 0.002


def test_normal_moments():
    z = RngStream(2024, 0).normal("n", 0, size=200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_integers_inclusive_range():
    s = RngStream(7, 0)
    vals = s.integers("d", 0, 2, 4, size=10_000)
    assert set(np.unique(vals)) == {2, 3, 4}
    # roughly uniform over the three values
    counts = np.bincount(vals)[2:]
    assert counts.min() > 2500


def test_permutation_is_a_permutation():
    s = RngStream(3, 1)
    p = s.permutation("perm", 9, 256)
    assert sorted(p.tolist()) == list(range(256))
    assert np.array_equal(p, s.permutation("perm", 9, 256))
    assert not np.array_equal(p, s.permutation("perm", 10, 256))
