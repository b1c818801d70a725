"""Per-episode run logs, regret and learning time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LEARNING_FRACTION = 0.8
NOT_REACHED = None


@dataclass
class RunLog:
    """Episode returns plus the benchmark's best achievable return.

    ``regrets`` may be supplied directly (bandits log pseudo-regret against the
    best arm mean); otherwise regret is ``optimal_return - return``.
    """

    optimal_return: float
    returns: list = field(default_factory=list)
    explicit_regrets: list | None = None

    def append(self, ret: float, regret: float | None = None):
        self.returns.append(float(ret))
        if regret is not None:
            if self.explicit_regrets is None:
                self.explicit_regrets = []
            self.explicit_regrets.append(float(regret))

    def __len__(self):
        return len(self.returns)

    @property
    def regrets(self) -> np.ndarray:
        if self.explicit_regrets is not None:
            return np.asarray(self.explicit_regrets, dtype=np.float64)
        return self.optimal_return - np.asarray(self.returns, dtype=np.float64)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.regrets)

    @property
    def solved(self) -> np.ndarray:
        """Per episode: has the learning-time criterion been met at or before it."""
        lt = learning_time(self)
        out = np.zeros(len(self), dtype=bool)
        if lt is not None:
            out[lt - 1:] = True
        return out


def learning_time(log) -> int | None:
    """First episode ``l`` (1-based) with cumulative regret < 0.8 * l, else ``None``.

    Accepts a :class:`RunLog` or a sequence of per-episode regrets.
    """
    regrets = log.regrets if isinstance(log, RunLog) else np.asarray(log, dtype=np.float64)
    if len(regrets) == 0:
        return NOT_REACHED
    cum = np.cumsum(regrets)
    hit = np.flatnonzero(cum < LEARNING_FRACTION * np.arange(1, len(cum) + 1))
    return int(hit[0]) + 1 if hit.size else NOT_REACHED


def median_learning_time(times) -> float:
    """Median over seeds with unreached runs counted as +inf."""
    vals = [math.inf if t is None else float(t) for t in times]
    if not vals:
        return math.inf
    return float(np.median(vals))


def deep_sea_score(summaries: dict, depths, episode_budget: int) -> float:
    """Fraction of ``depths`` whose median learning time over seeds is within budget.

    ``summaries`` maps depth -> list of per-seed learning times (``None`` = not reached).
    """
    depths = list(depths)
    if not depths:
        raise ValueError("depths must be nonempty")
    solved = sum(median_learning_time(summaries.get(d, [])) <= episode_budget for d in depths)
    return solved / len(depths)
