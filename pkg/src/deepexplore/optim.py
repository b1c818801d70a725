"""Parameter update rules: SGD, Langevin SGD, Adam and preconditioned Langevin-Adam.

All steps are value-in / value-out: inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class OptimConfig:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps_stab: float = 1e-8
    noise_scale: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.eps_stab > 0:
            raise ValueError("eps_stab must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")


@dataclass
class OptimState:
    """Raw first/second moment estimates and the number of steps taken."""

    m: np.ndarray
    v: np.ndarray
    k: int = 0

    @classmethod
    def zeros(cls, n: int) -> "OptimState":
        return cls(np.zeros(n), np.zeros(n), 0)

    def copy(self) -> "OptimState":
        return OptimState(self.m.copy(), self.v.copy(), self.k)


def _check(params, grad):
    params = np.asarray(params, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    if params.shape != grad.shape or params.ndim != 1:
        raise ValueError(f"length mismatch: params {params.shape} vs grad {grad.shape}")
    return params, grad


def sgd_step(params, grad, alpha: float) -> np.ndarray:
    params, grad = _check(params, grad)
    return params - alpha * grad


def langevin_sgd_step(params, grad, alpha: float, dataset_size: int, sigma_sq: float,
                      rng: np.random.Generator) -> np.ndarray:
    """``params - alpha*grad + sqrt(2*alpha*sigma_sq/dataset_size) * z``.

    ``grad`` is the gradient of ``loss(minibatch)/batch + prior/dataset_size``.
    ``sigma_sq = 1`` is plain Langevin SGD; other values give the sigma-scaled
    variant where the learning rate absorbs the observation noise.
    """
    params, grad = _check(params, grad)
    if dataset_size < 1:
        raise ValueError("dataset_size must be positive")
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be non-negative")
    out = params - alpha * grad
    if sigma_sq > 0:
        out += np.sqrt(2.0 * alpha * sigma_sq / dataset_size) * rng.standard_normal(params.size)
    return out


def bias_corrected_rate(cfg: OptimConfig, k: int) -> float:
    """Step size at iteration ``k >= 1``."""
    return cfg.alpha * np.sqrt(1.0 - cfg.beta2 ** k) / (1.0 - cfg.beta1 ** k)


def _adam(params, grad, state: OptimState, cfg: OptimConfig, noise_scale, z):
    params, grad = _check(params, grad)
    if state.m.shape != params.shape or state.v.shape != params.shape:
        raise ValueError("optimizer state length does not match params")
    if state.k < 0:
        raise ValueError("iteration counter must be non-negative")
    theta = params.copy()
    new = state.copy()
    new.k = state.k + 1
    alpha_k = bias_corrected_rate(cfg, new.k)
    kernels.adam_update(theta, grad, new.m, new.v, alpha_k, cfg.beta1, cfg.beta2,
                        cfg.eps_stab, noise_scale, z)
    return theta, new


def adam_step(params, grad, state: OptimState, cfg: OptimConfig):
    """One Adam step with the bias correction folded into the rate; returns (params, state)."""
    return _adam(params, grad, state, cfg, 0.0, None)


def langevin_adam_step(params, grad, state: OptimState, cfg: OptimConfig,
                       rng: np.random.Generator | None, noise_scale: float | None = None,
                       z: np.ndarray | None = None):
    """Adam step plus preconditioned Gaussian noise.

    Per coordinate the added noise has std ``sqrt(noise_scale * alpha_k / (sqrt(v_k) + eps))``.
    ``noise_scale`` defaults to ``cfg.noise_scale``. Pass ``z`` to supply the
    standard-normal draw yourself (all zeros reproduces :func:`adam_step`
    exactly); otherwise it is drawn from ``rng``.
    """
    if noise_scale is None:
        noise_scale = cfg.noise_scale
    n = np.shape(params)[0]
    if z is None:
        z = rng.standard_normal(n)
    else:
        z = np.ascontiguousarray(z, dtype=np.float64)
        if z.shape != (n,):
            raise ValueError("noise vector length does not match params")
    return _adam(params, grad, state, cfg, noise_scale, z)
