"""Episodic environments: deep sea, a Gaussian bandit and a small fixed-horizon MDP.

Each environment exposes ``observation_dim``, ``action_count``, ``reset()`` and
``step(action) -> (observation, reward, terminal)``.

Deep-sea geometry: the agent starts in the top-left cell ``(0, 0)`` and the
chest sits in the bottom-right cell ``(N-1, N-1)``. The costly ("right")
direction moves toward the chest; taking it in the chest cell pays 1. This is
the mirror image of the upper-right/lower-left picture and every quantity
(returns, regret, success probabilities) is identical under the reflection.
"""

from __future__ import annotations

import numpy as np


def generate_flip_mask(depth: int, rng: np.random.Generator) -> np.ndarray:
    """Independent fair coin per cell; ``True`` swaps which raw action means "right"."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return rng.random((depth, depth)) < 0.5


class DeepSea:
    def __init__(self, depth: int, mask: np.ndarray | None = None, rng: np.random.Generator | None = None,
                 move_cost: float = 0.01, treasure: float = 1.0):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = int(depth)
        if mask is None:
            mask = generate_flip_mask(depth, rng if rng is not None else np.random.default_rng(0))
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (depth, depth):
            raise ValueError("mask must have shape (depth, depth)")
        self.mask = mask
        self.move_cost = move_cost
        self.penalty = move_cost / depth
        self.treasure = treasure
        self.row = 0
        self.col = 0
        self._done = True

    @property
    def observation_dim(self) -> int:
        return self.depth * self.depth

    @property
    def action_count(self) -> int:
        return 2

    @property
    def optimal_return(self) -> float:
        return self.treasure - self.move_cost

    def cell_index(self, row: int, col: int) -> int:
        return row * self.depth + col

    def observation(self, row: int, col: int) -> np.ndarray:
        obs = np.zeros(self.observation_dim)
        if row < self.depth:
            obs[self.cell_index(row, col)] = 1.0
        return obs

    def reset(self) -> np.ndarray:
        self.row = 0
        self.col = 0
        self._done = False
        return self.observation(0, 0)

    def is_costly(self, action: int) -> bool:
        """Whether raw ``action`` moves toward the chest from the current cell."""
        return bool(action) != bool(self.mask[self.row, self.col])

    def step(self, action: int):
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        if action not in (0, 1):
            raise ValueError("deep sea actions are 0 and 1")
        reward = 0.0
        n = self.depth
        if self.is_costly(action):
            if self.row == n - 1 and self.col == n - 1:
                reward += self.treasure
            reward -= self.penalty
            self.col = min(self.col + 1, n - 1)
        else:
            self.col = max(self.col - 1, 0)
        self.row += 1
        self._done = self.row == n
        return self.observation(self.row, self.col), reward, self._done


def deep_sea_reset(env: DeepSea) -> np.ndarray:
    return env.reset()


def deep_sea_step(env: DeepSea, action: int):
    return env.step(action)


class GaussianBandit:
    """Single-step episodes from a fixed start state; reward = mean[a] + N(0, noise_var)."""

    def __init__(self, arm_means, noise_var: float, rng: np.random.Generator):
        self.arm_means = np.asarray(arm_means, dtype=np.float64)
        if self.arm_means.ndim != 1 or self.arm_means.size == 0:
            raise ValueError("arm_means must be a nonempty vector")
        if noise_var < 0:
            raise ValueError("noise_var must be non-negative")
        self.noise_var = float(noise_var)
        self.rng = rng

    observation_dim = 1

    @property
    def action_count(self) -> int:
        return self.arm_means.size

    @property
    def optimal_return(self) -> float:
        return float(self.arm_means.max())

    def reset(self) -> np.ndarray:
        return np.ones(1)

    def pull(self, action: int) -> float:
        if not 0 <= action < self.arm_means.size:
            raise IndexError(f"arm {action} out of range")
        noise = np.sqrt(self.noise_var) * self.rng.standard_normal() if self.noise_var > 0 else 0.0
        return float(self.arm_means[action] + noise)

    def step(self, action: int):
        return np.zeros(1), self.pull(action), True


def bandit_step(env: GaussianBandit, action: int) -> float:
    return env.pull(action)


class FourStateMdp:
    """Four states, actions up/down, horizon 6.

    ``up`` keeps the state, ``down`` moves one state down (state 4 stays put).
    Rewards are 0 for ``up`` and -0.01 for ``down``. The pair (4, down) is the
    one the propagation demo treats as observed only once.
    States are 0-indexed internally: state ``x`` in 1..4 is index ``x - 1``.
    """

    n_states = 4
    n_actions = 2
    horizon = 6
    UP, DOWN = 0, 1
    scarce_pair = (3, 1)

    def __init__(self):
        nxt = np.zeros((4, 2), dtype=np.int64)
        for x in range(4):
            nxt[x, self.UP] = x
            nxt[x, self.DOWN] = min(x + 1, 3)
        self.next_state = nxt
        self.reward = np.array([[0.0, -0.01]] * 4)
        self.h = 0
        self.x = 0

    observation_dim = 4
    action_count = 2

    def reset(self) -> np.ndarray:
        self.h = 0
        self.x = 0
        return np.eye(4)[0]

    def step(self, action: int):
        if self.h >= self.horizon:
            raise RuntimeError("episode finished")
        r = float(self.reward[self.x, action])
        self.x = int(self.next_state[self.x, action])
        self.h += 1
        done = self.h == self.horizon
        return (np.zeros(4) if done else np.eye(4)[self.x]), r, done
