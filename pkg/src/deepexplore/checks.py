"""Statistical self-checks: Langevin SGD posterior sampling and the dithering lower bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .envs import DeepSea, generate_flip_mask
from .optim import langevin_sgd_step


@dataclass
class PosteriorReport:
    empirical_mean: float
    empirical_var: float
    posterior_mean: float
    posterior_var: float
    mean_error: float  # |diff| / max(|posterior mean|, posterior sd)
    var_error: float  # relative
    tolerance: float
    steps: int
    chains: int

    @property
    def passed(self) -> bool:
        return self.mean_error <= self.tolerance and self.var_error <= self.tolerance


def conjugate_posterior(observations, sigma_sq: float, prior_var: float):
    """Mean and variance of theta given y_i ~ N(theta, sigma_sq) and theta ~ N(0, prior_var)."""
    y = np.asarray(observations, dtype=np.float64)
    precision = y.size / sigma_sq + 1.0 / prior_var
    return float(y.sum() / sigma_sq / precision), float(1.0 / precision)


def default_step(n: int, sigma_sq: float, prior_var: float, contraction: float = 0.02) -> float:
    """Step size whose per-step contraction toward the posterior mean is ``contraction``.

    The discretized chain's stationary variance is inflated by roughly
    ``1 / (1 - contraction / 2)``, about 1% at the default.
    """
    n_eff = max(n, 1)
    return contraction * n_eff / (n / sigma_sq + 1.0 / prior_var)


def posterior_check(alpha: float | None, sigma_sq_likelihood: float, prior_var: float, observations,
                    burn_in: int, samples: int, rng: np.random.Generator, batch: int | None = None,
                    chains: int = 32, tolerance: float | None = None) -> PosteriorReport:
    """Run independent Langevin SGD chains on the conjugate Gaussian model and compare moments.

    Each step uses the gradient of ``mean_batch (theta - y)^2 / (2 sigma_sq) + theta^2 / (2 prior_var |D|)``
    and noise ``sqrt(2 alpha / |D|)``. ``batch=None`` is full batch (tolerance 5%);
    a minibatch run defaults to 8%. With no observations the chain targets the prior.
    """
    if sigma_sq_likelihood <= 0 or prior_var <= 0:
        raise ValueError("variances must be positive")
    y = np.asarray(observations, dtype=np.float64).ravel()
    n = y.size
    n_eff = max(n, 1)
    if alpha is None:
        alpha = default_step(n, sigma_sq_likelihood, prior_var)
    if tolerance is None:
        tolerance = 0.05 if batch is None or batch >= n else 0.08
    theta = np.zeros(chains)
    total = burn_in + samples
    s1 = np.zeros(chains)
    s2 = np.zeros(chains)
    for k in range(total):
        if n == 0:
            fit = 0.0
        elif batch is None or batch >= n:
            fit = (theta - y.mean()) / sigma_sq_likelihood
        else:
            ybar = y[rng.integers(0, n, size=(chains, batch))].mean(axis=1)
            fit = (theta - ybar) / sigma_sq_likelihood
        grad = fit + theta / (prior_var * n_eff)
        theta = langevin_sgd_step(theta, grad, alpha, n_eff, 1.0, rng)
        if k >= burn_in:
            s1 += theta
            s2 += theta * theta
    m = s1.sum() / (samples * chains)
    var = s2.sum() / (samples * chains) - m * m
    pm, pv = conjugate_posterior(y, sigma_sq_likelihood, prior_var)
    return PosteriorReport(
        float(m), float(var), pm, pv,
        abs(m - pm) / max(abs(pm), math.sqrt(pv)), abs(var - pv) / pv,
        tolerance, samples, chains,
    )


@dataclass
class DitheringReport:
    depth: int
    episodes: int
    successes: int
    success_rate: float
    expected_rate: float
    rate_z: float  # (rate - expected) / binomial std
    median_first_success: float
    band: tuple  # 99% band for the sample median of the observed number of geometric draws
    draws: int

    @property
    def passed(self) -> bool:
        lo, hi = self.band
        return abs(self.rate_z) <= 3.0 and lo <= self.median_first_success <= hi


def median_band(p: float, m: int, level: float = 0.99):
    """Central ``level`` interval for the lower sample median of ``m`` Geometric(p) draws (support 1, 2, ...)."""
    k = (m + 1) // 2
    half = (1.0 - level) / 2.0
    # P(median <= t) = P(Binom(m, F(t)) >= k), F(t) = 1 - (1 - p)^t
    def cdf(t):
        return stats.binom.sf(k - 1, m, 1.0 - (1.0 - p) ** t)

    hi_t = int(math.ceil(50.0 / p))
    ts = np.arange(1, hi_t + 1)
    c = cdf(ts)
    lo = int(ts[np.searchsorted(c, half, side="right")])  # first t with cdf > half
    hi = int(ts[np.searchsorted(c, 1.0 - half, side="left")])  # first t with cdf >= 1-half
    return lo, hi


def simulate_uniform_policy(env: DeepSea, episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Per-episode flag: did a uniformly random policy collect the treasure."""
    actions = rng.integers(0, 2, size=(episodes, env.depth))
    out = np.zeros(episodes, dtype=bool)
    for e in range(episodes):
        env.reset()
        total_pos = False
        for a in actions[e]:
            _, r, _ = env.step(int(a))
            total_pos = total_pos or r > 0.5
        out[e] = total_pos
    return out


def dithering_bound_check(depth: int, episodes: int, trials: int, rng: np.random.Generator) -> DitheringReport:
    """Uniform-random play on ``trials`` independently masked deep seas of ``episodes`` episodes each.

    Inter-success gaps (the first one included) are Geometric(2^-depth) draws;
    their lower sample median is compared with the exact 99% band.
    """
    if depth < 1 or episodes < 1 or trials < 1:
        raise ValueError("depth, episodes and trials must be positive")
    p = 0.5 ** depth
    gaps = []
    hits = 0
    for _ in range(trials):
        env = DeepSea(depth, generate_flip_mask(depth, rng))
        succ = np.flatnonzero(simulate_uniform_policy(env, episodes, rng)) + 1
        hits += succ.size
        if succ.size:
            gaps.extend(np.diff(np.concatenate([[0], succ])).tolist())
    total = episodes * trials
    rate = hits / total
    z = (rate - p) / math.sqrt(p * (1 - p) / total)
    if gaps:
        g = np.sort(np.asarray(gaps))
        med = float(g[(len(g) + 1) // 2 - 1])
        band = median_band(p, len(g))
    else:
        med, band = math.inf, (0, 0)
    return DitheringReport(depth, total, hits, rate, p, float(z), med, band, len(gaps))
