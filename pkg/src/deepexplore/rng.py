"""Named random substreams derived from one root seed.

Each consumer (mask draw, initialization, Langevin noise, minibatches, action
tie-breaks, ...) owns its own generator, so switching the noise off never
shifts the minibatch draws and trial streams never depend on scheduling.
"""

import numpy as np

STREAMS = (
    "env_mask",
    "env",
    "init",
    "prior",
    "noise",
    "minibatch",
    "action",
    "model_draw",
    "insertion",
)


def substream(seed: int, name: str, member: int = 0) -> np.random.Generator:
    if name not in STREAMS:
        raise KeyError(f"unknown stream {name!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS.index(name), int(member)))
    return np.random.default_rng(ss)


class Streams:
    """Lazily created substreams for one root seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache = {}

    def get(self, name: str, member: int = 0) -> np.random.Generator:
        key = (name, member)
        if key not in self._cache:
            self._cache[key] = substream(self.seed, name, member)
        return self._cache[key]

    def __getattr__(self, name):
        if name in STREAMS:
            return self.get(name)
        raise AttributeError(name)
