"""FIFO transition buffer with uniform with-replacement minibatches.

Observations are interned in an :class:`ObservationTable` shared by every
buffer of an agent, and transitions store row indices into it. For the
finite-state environments used here this keeps a 100k-sample buffer small
and lets the network kernels read states straight out of the table.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __eq__(self, other):
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            self.action == other.action
            and self.reward == other.reward
            and self.terminal == other.terminal
            and np.array_equal(self.state, other.state)
            and np.array_equal(self.next_state, other.next_state)
        )

    __hash__ = None


class ObservationTable:
    """Deduplicated, append-only store of observation vectors."""

    def __init__(self, dim: int, initial: int = 64):
        self.dim = int(dim)
        self._rows = np.zeros((max(initial, 1), self.dim))
        self._index = {}
        self.size = 0

    def intern(self, obs) -> int:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.dim,):
            raise ValueError(f"observation must have shape ({self.dim},), got {obs.shape}")
        key = obs.tobytes()
        idx = self._index.get(key)
        if idx is None:
            if self.size == len(self._rows):
                grown = np.zeros((2 * len(self._rows), self.dim))
                grown[: self.size] = self._rows[: self.size]
                self._rows = grown
            idx = self.size
            self._rows[idx] = obs
            self._index[key] = idx
            self.size += 1
        return idx

    @property
    def rows(self) -> np.ndarray:
        """Contiguous view of the stored observations."""
        return self._rows[: self.size]

    def __len__(self):
        return self.size


class Batch(NamedTuple):
    states: np.ndarray  # row indices into the observation table
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray


class Buffer:
    def __init__(self, capacity: int, table: ObservationTable):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.table = table
        n = min(self.capacity, 1024)
        self._s = np.zeros(n, dtype=np.int64)
        self._a = np.zeros(n, dtype=np.int64)
        self._r = np.zeros(n)
        self._s2 = np.zeros(n, dtype=np.int64)
        self._t = np.zeros(n, dtype=bool)
        self._start = 0  # slot of the oldest item once the ring is full
        self._size = 0

    def __len__(self):
        return self._size

    def _grow(self):
        n = min(2 * len(self._s), self.capacity)
        for name in ("_s", "_a", "_r", "_s2", "_t"):
            old = getattr(self, name)
            new = np.zeros(n, dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def add(self, t: Transition) -> "Buffer":
        """Append ``t``; once full the oldest item is evicted."""
        return self.add_indexed(
            self.table.intern(t.state), t.action, t.reward,
            self.table.intern(t.next_state), t.terminal,
        )

    def add_indexed(self, s: int, a: int, r: float, s2: int, terminal: bool) -> "Buffer":
        if self._size < self.capacity:
            if self._size == len(self._s):
                self._grow()
            slot = self._size
            self._size += 1
        else:
            slot = self._start
            self._start = (self._start + 1) % self.capacity
        self._s[slot] = s
        self._a[slot] = a
        self._r[slot] = r
        self._s2[slot] = s2
        self._t[slot] = terminal
        return self

    def _slots(self, positions: np.ndarray) -> np.ndarray:
        # position 0 is the oldest item
        return (self._start + positions) % max(len(self._s), 1) if self._size == self.capacity else positions

    def batch_at(self, positions) -> Batch:
        slots = self._slots(np.asarray(positions, dtype=np.int64))
        return Batch(self._s[slots], self._a[slots], self._r[slots], self._s2[slots], self._t[slots])

    def sample_batch(self, batch: int, rng: np.random.Generator) -> Batch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if batch < 1:
            raise ValueError("batch must be positive")
        return self.batch_at(rng.integers(0, self._size, size=batch))

    def _transition(self, s, a, r, s2, t) -> Transition:
        rows = self.table.rows
        return Transition(rows[s].copy(), int(a), float(r), rows[s2].copy(), bool(t))

    @property
    def items(self) -> list:
        """Stored transitions, oldest first."""
        b = self.batch_at(np.arange(self._size))
        return [self._transition(*x) for x in zip(*b)]


def sample_minibatch(buffer: Buffer, batch: int, rng: np.random.Generator) -> list:
    """``batch`` transitions drawn i.i.d. uniformly (with replacement) from the buffer."""
    b = buffer.sample_batch(batch, rng)
    return [buffer._transition(*x) for x in zip(*b)]
