"""Tabular Langevin Q-updates on a fixed-horizon MDP and empirical uncertainty maps.

Per stage ``h`` and pair ``(x, a)`` the update is a synchronous sweep

    Q_h(x,a) -= eps / sigma_sq * sum_{(r, x') in D_{x,a}} (Q_h(x,a) - r - max_a' Q_{h+1}(x',a'))
    Q_h(x,a) += sqrt(2 eps) * z

with every target read from the pre-step table and ``Q_H = 0``. Transition
lists are stored as sufficient statistics: count, reward sum and successor
counts, so "virtually infinite" data costs nothing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .envs import FourStateMdp


@dataclass
class TabularQ:
    q: np.ndarray  # (H, X, A); stage H is implicitly zero

    @classmethod
    def zeros(cls, horizon: int, n_states: int, n_actions: int) -> "TabularQ":
        return cls(np.zeros((horizon, n_states, n_actions)))

    @property
    def horizon(self) -> int:
        return self.q.shape[0]

    @property
    def extended(self) -> np.ndarray:
        """Table with the zero boundary stage appended, shape (H+1, X, A)."""
        return np.concatenate([self.q, np.zeros((1,) + self.q.shape[1:])])

    def values(self) -> np.ndarray:
        """max_a Q_{h+1}(x, a) for h = 0..H-1, shape (H, X)."""
        return self.extended[1:].max(axis=-1)


@dataclass
class TransitionStats:
    """Sufficient statistics of D_{x,a} per stage: counts, reward sums, successor counts."""

    counts: np.ndarray  # (H, X, A)
    reward_sums: np.ndarray  # (H, X, A)
    successors: np.ndarray  # (H, X, A, X)

    @classmethod
    def empty(cls, horizon: int, n_states: int, n_actions: int) -> "TransitionStats":
        return cls(np.zeros((horizon, n_states, n_actions)), np.zeros((horizon, n_states, n_actions)),
                   np.zeros((horizon, n_states, n_actions, n_states)))

    def add(self, h: int, x: int, a: int, r: float, x_next: int, count: float = 1.0):
        self.counts[h, x, a] += count
        self.reward_sums[h, x, a] += count * r
        self.successors[h, x, a, x_next] += count

    @property
    def shape(self):
        return self.counts.shape


def tabular_langevin_step(q: TabularQ, data: TransitionStats, eps: float, sigma_sq: float,
                          rng: np.random.Generator | None, noise: bool = True) -> TabularQ:
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    v_next = q.values()
    boot = np.einsum("hxay,hy->hxa", data.successors, v_next)
    grad = data.counts * q.q - data.reward_sums - boot
    new = q.q - (eps / sigma_sq) * grad
    if noise:
        new = new + np.sqrt(2.0 * eps) * rng.standard_normal(new.shape)
    return TabularQ(new)


def backward_induction(data: TransitionStats) -> TabularQ:
    """Fixed point of the noise-free update; pairs without data are set to 0."""
    horizon = data.shape[0]
    q = TabularQ(np.zeros(data.shape))
    n = np.maximum(data.counts, 1e-300)
    for h in range(horizon - 1, -1, -1):
        v = q.values()[h]
        fit = (data.reward_sums[h] + data.successors[h] @ v) / n[h]
        q.q[h] = np.where(data.counts[h] > 0, fit, 0.0)
    return q


def mdp_stats(mdp: FourStateMdp, large_count: float = 1000.0, scarce_count: float | None = 1.0) -> TransitionStats:
    """Every pair observed ``large_count`` times at every stage except the scarce pair.

    ``scarce_count=None`` gives the control data set where the scarce pair is
    also well sampled.
    """
    stats = TransitionStats.empty(mdp.horizon, mdp.n_states, mdp.n_actions)
    for h in range(mdp.horizon):
        for x in range(mdp.n_states):
            for a in range(mdp.n_actions):
                n = large_count
                if scarce_count is not None and (x, a) == mdp.scarce_pair:
                    n = scarce_count
                stats.add(h, x, a, mdp.reward[x, a], mdp.next_state[x, a], n)
    return stats


def pair_std(q_history) -> np.ndarray:
    """Population std of each Q entry over the snapshot axis (axis 0)."""
    hist = np.asarray(q_history, dtype=np.float64)
    if hist.shape[0] < 2:
        raise ValueError("window must contain at least 2 snapshots")
    return hist.std(axis=0)


def uncertainty_map(q_history, clip: float = 50.0) -> np.ndarray:
    """Per state: sum over actions (last axis) of the std across snapshots, clipped at ``clip``."""
    if clip < 0:
        raise ValueError("clip must be non-negative")
    return np.minimum(pair_std(q_history).sum(axis=-1), clip)


@dataclass
class PropagationResult:
    update_index: np.ndarray  # (K,) update count of each snapshot
    snapshots: np.ndarray  # (K, H, X, A)
    window: int
    clip: float
    maps: list = field(default_factory=list)  # (update_index, (H, X) map) per full window

    def windowed_std(self) -> np.ndarray:
        """Trailing-window per-pair std for every full window, shape (K-window+1, H, X, A)."""
        w = self.window
        return np.stack([pair_std(self.snapshots[k - w + 1:k + 1]) for k in range(w - 1, len(self.snapshots))])

    def mean_std(self, skip: int = 0) -> np.ndarray:
        """Average trailing-window std per pair, ignoring the first ``skip`` windows."""
        return self.windowed_std()[skip:].mean(axis=0)

    def onset(self, threshold: float) -> np.ndarray:
        """Per pair: index (into full windows) where the trailing std first exceeds ``threshold``; -1 if never."""
        above = self.windowed_std() > threshold
        first = above.argmax(axis=0)
        return np.where(above.any(axis=0), first, -1)


def feeding_pairs(mdp: FourStateMdp) -> np.ndarray:
    """Boolean (H, X, A): pairs from which the scarce pair can still be taken later in the episode.

    The scarce pair itself counts as feeding at every stage.
    """
    sx, sa = mdp.scarce_pair
    out = np.zeros((mdp.horizon, mdp.n_states, mdp.n_actions), dtype=bool)
    reach = np.zeros((mdp.horizon + 1, mdp.n_states), dtype=bool)  # can take the scarce pair at stage >= h
    for h in range(mdp.horizon - 1, -1, -1):
        for x in range(mdp.n_states):
            for a in range(mdp.n_actions):
                out[h, x, a] = (x, a) == (sx, sa) or reach[h + 1, mdp.next_state[x, a]]
            reach[h, x] = out[h, x].any()
    return out


def run_propagation_demo(mdp: FourStateMdp, updates: int, rng: np.random.Generator, eps: float = 5e-4,
                         sigma_sq: float = 1.0, large_count: float = 1000.0, scarce_count: float | None = 1.0,
                         snapshot_every: int = 500, window: int = 10, clip: float = 50.0) -> PropagationResult:
    """Run tabular Langevin updates from a zero table and record snapshots and uncertainty maps."""
    if window < 2:
        raise ValueError("window must be >= 2")
    data = mdp_stats(mdp, large_count, scarce_count)
    q = TabularQ.zeros(mdp.horizon, mdp.n_states, mdp.n_actions)
    index, snaps = [], []
    for k in range(1, updates + 1):
        q = tabular_langevin_step(q, data, eps, sigma_sq, rng)
        if k % snapshot_every == 0:
            index.append(k)
            snaps.append(q.q.copy())
    res = PropagationResult(np.array(index, dtype=np.int64), np.array(snaps), window, clip)
    for k in range(window - 1, len(snaps)):
        res.maps.append((index[k], uncertainty_map(res.snapshots[k - window + 1:k + 1], clip)))
    return res


def write_uncertainty_csv(result: PropagationResult, path) -> None:
    """Rows ``update_index,h,x,score`` with states numbered from 1."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["update_index", "h", "x", "score"])
        for k, m in result.maps:
            for h in range(m.shape[0]):
                for x in range(m.shape[1]):
                    w.writerow([k, h, x + 1, repr(float(m[h, x]))])
