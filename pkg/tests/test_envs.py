import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepexplore.envs import (
    DeepSea,
    FourStateMdp,
    GaussianBandit,
    bandit_step,
    deep_sea_reset,
    deep_sea_step,
    generate_flip_mask,
)


def costly_action(env):
    # raw action that moves toward the chest from the current cell
    return 0 if env.mask[env.row, env.col] else 1


def test_reset_observation():
    env = DeepSea(10, rng=np.random.default_rng(0))
    o = deep_sea_reset(env)
    assert o.shape == (100,) and o[0] == 1 and o.sum() == 1
    assert np.array_equal(o, deep_sea_reset(env))


def test_all_costly_collects_treasure():
    env = DeepSea(10, rng=np.random.default_rng(1))
    env.reset()
    total, done, steps = 0.0, False, 0
    while not done:
        _, r, done = deep_sea_step(env, costly_action(env))
        total += r
        steps += 1
    assert steps == 10
    assert total == pytest.approx(0.99)
    assert env.optimal_return == pytest.approx(0.99)


def test_all_safe_returns_zero():
    env = DeepSea(8, rng=np.random.default_rng(2))
    env.reset()
    total = 0.0
    for _ in range(8):
        _, r, done = env.step(1 - costly_action(env))
        total += r
    assert done and total == 0.0


def test_all_false_mask_action_one_is_costly():
    env = DeepSea(5, mask=np.zeros((5, 5), dtype=bool))
    env.reset()
    for _ in range(5):
        assert env.is_costly(1) and not env.is_costly(0)
        env.step(0)


def test_step_after_terminal_and_bad_action():
    env = DeepSea(1, mask=np.zeros((1, 1), dtype=bool))
    env.reset()
    with pytest.raises(ValueError):
        env.step(2)
    obs, r, done = env.step(1)
    assert done and r == pytest.approx(0.99) and obs.sum() == 0
    with pytest.raises(RuntimeError):
        env.step(0)


def test_mask_determinism_and_balance():
    a = generate_flip_mask(100, np.random.default_rng(7))
    assert np.array_equal(a, generate_flip_mask(100, np.random.default_rng(7)))
    frac = a.mean()
    assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / a.size)


@given(seed=st.integers(0, 2 ** 32 - 1), depth=st.integers(1, 12))
def test_episode_invariants(seed, depth):
    rng = np.random.default_rng(seed)
    env = DeepSea(depth, rng=rng)
    obs = env.reset()
    total, steps, done = 0.0, 0, False
    while not done:
        assert obs.sum() == 1
        obs, r, done = env.step(int(rng.integers(2)))
        total += r
        steps += 1
        assert 0 <= env.col < depth
    assert steps == depth and env.row == depth
    k = round(-total * depth / 0.01) if total <= 0 else round((1 - total) * depth / 0.01)
    if total > 0:
        assert 1 <= k <= depth and total == pytest.approx(1 - k * 0.01 / depth)
        assert env.optimal_return - total >= -1e-12
    else:
        assert 0 <= k <= depth and total == pytest.approx(-k * 0.01 / depth)
        assert env.optimal_return - total >= 0.99 - 1e-12


def test_uniform_random_treasure_rate_depth6():
    rng = np.random.default_rng(11)
    env = DeepSea(6, rng=rng)
    n = 100_000
    acts = rng.integers(0, 2, size=(n, 6))
    hits = 0
    for e in range(n):
        env.reset()
        ret = 0.0
        for a in acts[e]:
            ret += env.step(int(a))[1]
        hits += ret > 0.5
    p = 1 / 64
    assert abs(hits / n - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_bandit():
    b = GaussianBandit([1.0, -2.0], 0.0, np.random.default_rng(0))
    assert bandit_step(b, 1) == -2.0
    with pytest.raises(IndexError):
        b.pull(2)
    obs, r, done = b.step(0)
    assert done and r == 1.0
    assert b.optimal_return == 1.0


def test_bandit_noise_moments():
    b = GaussianBandit([0.3], 0.5, np.random.default_rng(3))
    r = np.array([b.pull(0) for _ in range(100_000)])
    assert abs(r.mean() - 0.3) < 3 * np.sqrt(0.5 / 1e5)
    assert abs(r.var() / 0.5 - 1) < 0.05


def test_four_state_mdp_fixed_horizon():
    m = FourStateMdp()
    rng = np.random.default_rng(0)
    for _ in range(20):
        m.reset()
        steps, done = 0, False
        while not done:
            _, _, done = m.step(int(rng.integers(2)))
            steps += 1
        assert steps == 6
    assert m.next_state[3, m.DOWN] == 3 and m.next_state[0, m.DOWN] == 1 and m.next_state[2, m.UP] == 2
    with pytest.raises(RuntimeError):
        m.step(0)
