import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepexplore.optim import (
    OptimConfig,
    OptimState,
    adam_step,
    bias_corrected_rate,
    langevin_adam_step,
    langevin_sgd_step,
    sgd_step,
)


def adam_oracle(theta, g, m, v, k, alpha, b1, b2, eps):
    """Textbook Adam with the bias correction folded into the step size; k is the new iteration."""
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    a_k = alpha * np.sqrt(1 - b2 ** k) / (1 - b1 ** k)
    return theta - a_k * m / (np.sqrt(v) + eps), m, v


def test_config_validation():
    with pytest.raises(ValueError):
        OptimConfig(alpha=0)
    with pytest.raises(ValueError):
        OptimConfig(beta1=1.0)
    with pytest.raises(ValueError):
        OptimConfig(eps_stab=0)
    with pytest.raises(ValueError):
        OptimConfig(noise_scale=-1)


def test_sgd_step():
    np.testing.assert_array_equal(sgd_step(np.array([1.0, 2.0]), np.array([1.0, -1.0]), 0.5), [0.5, 2.5])
    with pytest.raises(ValueError):
        sgd_step(np.zeros(2), np.zeros(3), 0.1)


def test_langevin_sgd_zero_noise_is_sgd(rng):
    p, g = rng.standard_normal(5), rng.standard_normal(5)
    np.testing.assert_array_equal(langevin_sgd_step(p, g, 0.1, 10, 0.0, rng), p - 0.1 * g)


def test_langevin_sgd_unit_noise_std():
    out = langevin_sgd_step(np.zeros(100_000), np.zeros(100_000), 0.5, 1, 1.0, np.random.default_rng(0))
    assert abs(out.std() - 1.0) < 0.02


def test_langevin_sgd_table_constants_noise_std():
    # sqrt(2 * 0.01 * 0.005 / 100) = 0.001
    out = langevin_sgd_step(np.zeros(100_000), np.zeros(100_000), 0.01, 100, 0.005, np.random.default_rng(1))
    assert abs(out.std() / 0.001 - 1.0) < 0.02


def test_langevin_sgd_errors(rng):
    with pytest.raises(ValueError):
        langevin_sgd_step(np.zeros(2), np.zeros(3), 0.1, 1, 1.0, rng)
    with pytest.raises(ValueError):
        langevin_sgd_step(np.zeros(2), np.zeros(2), 0.1, 0, 1.0, rng)


def test_adam_first_step_scalar():
    cfg = OptimConfig(alpha=0.001)
    p, st_ = adam_step(np.array([0.0]), np.array([1.0]), OptimState.zeros(1), cfg)
    # alpha_1 = 0.001 * sqrt(0.001) / 0.1; m = 0.1, v = 0.001
    expected = -0.001 * np.sqrt(0.001) / 0.1 * 0.1 / (np.sqrt(0.001) + 1e-8)
    assert p[0] == pytest.approx(expected, rel=1e-12)
    assert p[0] == pytest.approx(-0.001, rel=1e-4)
    assert st_.k == 1


def test_adam_zero_grad_zero_moments():
    p = np.array([1.0, -2.0])
    out, _ = adam_step(p, np.zeros(2), OptimState.zeros(2), OptimConfig())
    np.testing.assert_array_equal(out, p)


def test_adam_sign_sgd_when_betas_zero():
    cfg = OptimConfig(alpha=0.1, beta1=0.0, beta2=0.0)
    g = np.array([3.0, -0.5, 1e-3])
    out, _ = adam_step(np.zeros(3), g, OptimState.zeros(3), cfg)
    np.testing.assert_allclose(out, -0.1 * g / (np.abs(g) + 1e-8), rtol=1e-12)


def test_bias_corrected_rate():
    cfg = OptimConfig(alpha=0.01, beta1=0.9, beta2=0.999)
    assert bias_corrected_rate(cfg, 1) == pytest.approx(0.01 * np.sqrt(0.001) / 0.1)
    assert bias_corrected_rate(cfg, 10 ** 6) == pytest.approx(0.01)


@given(seed=st.integers(0, 2 ** 32 - 1), steps=st.integers(1, 20))
def test_adam_matches_oracle(seed, steps):
    rng = np.random.default_rng(seed)
    cfg = OptimConfig(alpha=float(rng.uniform(1e-4, 0.1)), beta1=float(rng.uniform(0, 0.99)),
                      beta2=float(rng.uniform(0, 0.999)))
    theta = rng.standard_normal(6)
    state = OptimState.zeros(6)
    t, m, v = theta.copy(), np.zeros(6), np.zeros(6)
    for k in range(1, steps + 1):
        g = rng.standard_normal(6)
        theta, state = adam_step(theta, g, state, cfg)
        t, m, v = adam_oracle(t, g, m, v, k, cfg.alpha, cfg.beta1, cfg.beta2, cfg.eps_stab)
    np.testing.assert_allclose(theta, t, rtol=1e-12, atol=1e-14)
    assert state.k == steps
    assert np.all(state.v >= 0)


def test_steps_do_not_mutate_inputs(rng):
    p, g = rng.standard_normal(4), rng.standard_normal(4)
    state = OptimState(rng.standard_normal(4), rng.random(4), 3)
    snap = (p.copy(), g.copy(), state.m.copy(), state.v.copy(), state.k)
    adam_step(p, g, state, OptimConfig())
    langevin_adam_step(p, g, state, OptimConfig(), rng)
    assert all(np.array_equal(a, b) for a, b in zip(snap[:4], (p, g, state.m, state.v)))
    assert state.k == 3


def test_langevin_adam_zero_noise_bitwise(rng):
    p, state = rng.standard_normal(50), OptimState(rng.standard_normal(50), rng.random(50), 7)
    cfg = OptimConfig(alpha=0.01)
    for _ in range(5):
        g = rng.standard_normal(50)
        a, sa = adam_step(p, g, state, cfg)
        b, sb = langevin_adam_step(p, g, state, cfg, None, z=np.zeros(50))
        assert a.tobytes() == b.tobytes()
        assert sa.m.tobytes() == sb.m.tobytes() and sa.v.tobytes() == sb.v.tobytes()
        p, state = a, sa


def test_langevin_adam_noise_std():
    n = 100_000
    cfg = OptimConfig(alpha=0.01, beta1=0.9, beta2=0.999)
    v0 = np.full(n, 0.04)
    state = OptimState(np.zeros(n), v0, 9)
    out, new = langevin_adam_step(np.zeros(n), np.zeros(n), state, cfg, np.random.default_rng(5))
    a_k = bias_corrected_rate(cfg, 10)
    expected = np.sqrt(2 * a_k / (np.sqrt(new.v[0]) + cfg.eps_stab))
    assert abs(out.std() / expected - 1) < 0.02


def test_langevin_adam_custom_noise_scale():
    n = 100_000
    cfg = OptimConfig(alpha=0.01)
    state = OptimState(np.zeros(n), np.full(n, 1.0), 1000)
    out, new = langevin_adam_step(np.zeros(n), np.zeros(n), state, cfg, np.random.default_rng(6),
                                  noise_scale=1e-3)
    expected = np.sqrt(1e-3 * bias_corrected_rate(cfg, 1001) / (np.sqrt(new.v[0]) + 1e-8))
    assert abs(out.std() / expected - 1) < 0.02


def test_langevin_adam_deterministic():
    cfg = OptimConfig()
    p, g = np.ones(10), np.ones(10)
    a, _ = langevin_adam_step(p, g, OptimState.zeros(10), cfg, np.random.default_rng(1))
    b, _ = langevin_adam_step(p, g, OptimState.zeros(10), cfg, np.random.default_rng(1))
    assert a.tobytes() == b.tobytes()


def test_length_mismatch_errors(rng):
    with pytest.raises(ValueError):
        adam_step(np.zeros(3), np.zeros(2), OptimState.zeros(3), OptimConfig())
    with pytest.raises(ValueError):
        adam_step(np.zeros(3), np.zeros(3), OptimState.zeros(2), OptimConfig())
    with pytest.raises(ValueError):
        langevin_adam_step(np.zeros(3), np.zeros(3), OptimState.zeros(3), OptimConfig(), None, z=np.zeros(2))
