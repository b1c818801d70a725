"""Value-based agents: DQN, Langevin DQN, the bandit Langevin agent and ensembles.

All four deep-RL agents share one update kernel. The objective per minibatch is

    mean_n (Q(s_n)[a_n] - y_n)^2 + sigma_sq * lam * |theta|^2 / |D|

followed by an Adam step. Langevin agents add preconditioned Gaussian noise
with scale ``2 * sigma_sq / |D|`` (the learning rate absorbs the observation
noise variance). DQN uses ``sigma_sq = lam = 0`` and no noise, so with the
noise forced to zero the two produce bitwise-identical parameter trajectories.

Observations are interned in an :class:`ObservationTable`; target and prior
network values are cached per table row and recomputed only when the target
is refreshed or new rows appear.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import kernels
from .metrics import RunLog
from .numerics import MlpSpec, dumps, forward_rows, init_params, loads
from .optim import OptimConfig, OptimState, adam_step, langevin_adam_step, langevin_sgd_step
from .replay import Batch, Buffer, ObservationTable, Transition
from .rng import Streams

KINDS = ("dqn", "langevin", "boot", "ensemble-langevin")
LANGEVIN_KINDS = ("langevin", "ensemble-langevin")
ENSEMBLE_KINDS = ("boot", "ensemble-langevin")


@dataclass(frozen=True)
class AgentConfig:
    spec: MlpSpec
    optim: OptimConfig = field(default_factory=OptimConfig)
    kind: str = "langevin"
    sigma_sq: float = 0.005
    lam: float = 1.0
    epsilon: float = 0.0
    epsilon_decay: bool = False  # linear from epsilon_start to 0 over the run
    epsilon_start: float = 0.5
    batch: int = 128
    target_period: int = 4
    updates_per_env_step: float = 1.0
    inter_episodic: bool = True
    buffer_capacity: int = 100_000
    min_replay: int = 1  # update phases are skipped until the buffer holds this many items
    noise: bool = True  # False zeroes the Gaussian term of Langevin updates
    ensemble_size: int = 1
    insertion_prob: float = 1.0
    prior_scale: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.sigma_sq < 0 or self.lam < 0:
            raise ValueError("sigma_sq and lam must be non-negative")
        if not 0.0 <= self.epsilon <= 1.0 or not 0.0 <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.is_langevin and (self.epsilon > 0 or self.epsilon_decay):
            raise ValueError("Langevin agents act greedily; epsilon must be 0")
        if self.batch < 1 or self.target_period < 1 or self.buffer_capacity < 1 or self.min_replay < 1:
            raise ValueError("batch, target_period and buffer_capacity must be positive")
        if not self.updates_per_env_step > 0:
            raise ValueError("updates_per_env_step must be positive")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if not 0.0 < self.insertion_prob <= 1.0:
            raise ValueError("insertion_prob must lie in (0, 1]")
        if self.prior_scale < 0:
            raise ValueError("prior_scale must be non-negative")

    @property
    def is_langevin(self) -> bool:
        return self.kind in LANGEVIN_KINDS


def default_config(kind: str, input_dim: int, action_count: int, depth: int | None = None,
                   scale_sigma_with_depth: bool = True, **overrides) -> AgentConfig:
    """Hyperparameters used for the deep-sea experiments.

    For ``langevin`` the noise variance is ``0.005 * depth`` when a depth is
    given and scaling is on, otherwise 0.005.
    """
    def mlp(activation):
        return MlpSpec(input_dim, action_count, 2, 50, activation, 0.1)

    if kind == "dqn":
        cfg = AgentConfig(mlp("relu"), OptimConfig(alpha=0.001), kind="dqn",
                          sigma_sq=0.0, lam=0.0, epsilon=0.05)
    elif kind == "langevin":
        sigma = 0.005 * (depth if depth and scale_sigma_with_depth else 1)
        cfg = AgentConfig(mlp("leaky_relu"), OptimConfig(alpha=0.01), kind="langevin",
                          sigma_sq=sigma, lam=1.0, epsilon=0.0)
    elif kind == "boot":
        cfg = AgentConfig(mlp("relu"), OptimConfig(alpha=0.001), kind="boot",
                          sigma_sq=0.0, lam=0.0, ensemble_size=5, insertion_prob=0.5,
                          prior_scale=3.0)
    elif kind == "ensemble-langevin":
        cfg = AgentConfig(mlp("relu"), OptimConfig(alpha=0.001), kind="ensemble-langevin",
                          sigma_sq=1e-4, lam=0.0, ensemble_size=5, insertion_prob=1.0,
                          prior_scale=3.0)
    else:
        raise ValueError(f"unknown agent kind {kind!r}")
    return replace(cfg, **overrides) if overrides else cfg


class QModel:
    """Trainable network, its stale target copy and an optional frozen prior network."""

    def __init__(self, spec: MlpSpec, params: np.ndarray, prior: np.ndarray | None = None,
                 prior_scale: float = 0.0):
        self.spec = spec
        self.params = np.array(params, dtype=np.float64)
        self.target_params = self.params.copy()
        self.optim_state = OptimState.zeros(spec.n_params)
        self.prior = None if prior is None or prior_scale == 0 else np.array(prior, dtype=np.float64)
        if self.prior is not None:
            self.prior.setflags(write=False)
        self.prior_scale = float(prior_scale) if self.prior is not None else 0.0
        self.updates = 0
        self._tmax = np.zeros(0)
        self._prior_q = np.zeros((0, spec.output_dim))

    @classmethod
    def initialize(cls, spec, init_rng, prior_rng=None, prior_scale=0.0) -> "QModel":
        prior = init_params(spec, prior_rng) if prior_scale > 0 else None
        return cls(spec, init_params(spec, init_rng), prior, prior_scale)

    def refresh_target(self):
        self.target_params = self.params.copy()
        self._tmax = np.zeros(0)

    def prior_values(self, table: ObservationTable) -> np.ndarray:
        """``prior_scale * Q_prior`` for every table row (cached)."""
        done = len(self._prior_q)
        if done < table.size:
            new = forward_rows(self.spec, self.prior, table.rows, np.arange(done, table.size))
            self._prior_q = np.concatenate([self._prior_q, self.prior_scale * new])
        return self._prior_q

    def combined(self, params, table: ObservationTable, rows) -> np.ndarray:
        q = forward_rows(self.spec, params, table.rows, np.asarray(rows, dtype=np.int64))
        if self.prior is not None:
            q = q + self.prior_values(table)[rows]
        return q

    def evaluate(self, states) -> np.ndarray:
        """Combined Q-values for a (B, input_dim) matrix of states, bypassing the row caches."""
        states = np.ascontiguousarray(states, dtype=np.float64)
        rows = np.arange(len(states), dtype=np.int64)
        q = forward_rows(self.spec, self.params, states, rows)
        if self.prior is not None:
            q = q + self.prior_scale * forward_rows(self.spec, self.prior, states, rows)
        return q

    def q_values(self, table: ObservationTable, row: int) -> np.ndarray:
        return self.combined(self.params, table, np.array([row], dtype=np.int64))[0]

    def target_max(self, table: ObservationTable) -> np.ndarray:
        """max_a of the combined target network for every table row (cached)."""
        done = len(self._tmax)
        if done < table.size:
            new = self.combined(self.target_params, table, np.arange(done, table.size)).max(axis=1)
            self._tmax = np.concatenate([self._tmax, new])
        return self._tmax

    def prior_digest(self) -> bytes:
        return b"" if self.prior is None else self.prior.tobytes()

    def to_bytes(self) -> bytes:
        extra = [self.prior] if self.prior is not None else []
        head = struct.pack("<qqd", self.optim_state.k, self.updates, self.prior_scale)
        return head + dumps(self.spec, self.params, self.target_params,
                            self.optim_state.m, self.optim_state.v, *extra)

    @classmethod
    def from_bytes(cls, data: bytes) -> "QModel":
        k, updates, scale = struct.unpack_from("<qqd", data)
        spec, vecs = loads(data[struct.calcsize("<qqd"):])
        prior = vecs[4] if len(vecs) > 4 else None
        model = cls(spec, vecs[0], prior, scale)
        model.target_params = vecs[1].copy()
        model.optim_state = OptimState(vecs[2].copy(), vecs[3].copy(), k)
        model.updates = updates
        return model


@dataclass
class TDTerms:
    targets: np.ndarray
    predictions: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return self.targets - self.predictions

    def scaled_loss(self, sigma_sq: float) -> np.ndarray:
        """Per-sample ``residual^2 / (2 sigma_sq)``."""
        if not sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        return self.residuals ** 2 / (2.0 * sigma_sq)


def td_loss(model: QModel, batch, sigma_sq: float | None = None, table: ObservationTable | None = None):
    """Bootstrap targets and current combined predictions for a list of transitions.

    Returns :class:`TDTerms`; when ``sigma_sq`` is given, the per-sample scaled
    losses are returned alongside, as ``(terms, losses)``.
    """
    batch = list(batch)
    if not batch:
        raise ValueError("batch must be nonempty")
    if table is None:
        table = ObservationTable(model.spec.input_dim)
    s = np.array([table.intern(t.state) for t in batch], dtype=np.int64)
    s2 = np.array([table.intern(t.next_state) for t in batch], dtype=np.int64)
    a = np.array([t.action for t in batch], dtype=np.int64)
    r = np.array([t.reward for t in batch], dtype=np.float64)
    term = np.array([t.terminal for t in batch], dtype=bool)
    y = r + np.where(term, 0.0, model.target_max(table)[s2])
    pred = model.combined(model.params, table, s)[np.arange(len(batch)), a]
    terms = TDTerms(y, pred)
    return terms if sigma_sq is None else (terms, terms.scaled_loss(sigma_sq))


def _gradient(model: QModel, table: ObservationTable, b: Batch, reg: float):
    y = b.rewards + np.where(b.terminals, 0.0, model.target_max(table)[b.next_states])
    if model.prior is not None:
        # the prior is frozen, so fit the trainable part to the remainder
        y = y - model.prior_values(table)[b.states, b.actions]
    grad = np.empty(model.spec.n_params)
    loss = kernels.mlp_td_grad(model.params, model.spec.dims, model.spec.negative_slope,
                               table.rows, b.states, b.actions, y, reg, grad)
    return loss, grad


def _finish(model: QModel, params, state, cfg: AgentConfig):
    model.params = params
    model.optim_state = state
    model.updates += 1
    if model.updates % cfg.target_period == 0:
        model.refresh_target()
    return model


def langevin_dqn_update(model: QModel, buffer: Buffer, cfg: AgentConfig, rng: Streams | np.random.Generator,
                        noise_rng: np.random.Generator | None = None, noise: bool | None = None) -> QModel:
    """One noisy preconditioned step on a fresh minibatch (model is updated in place and returned).

    ``rng`` is either a :class:`Streams` bundle (minibatch and noise streams of
    member 0) or the minibatch generator, with ``noise_rng`` for the noise.
    """
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot update from an empty buffer")
    if isinstance(rng, Streams):
        rng, noise_rng = rng.minibatch, rng.noise
    noise = cfg.noise if noise is None else noise
    b = buffer.sample_batch(cfg.batch, rng)
    _, grad = _gradient(model, buffer.table, b, cfg.sigma_sq * cfg.lam / n)
    p = model.spec.n_params
    z = noise_rng.standard_normal(p) if noise and cfg.sigma_sq > 0 else np.zeros(p)
    params, state = langevin_adam_step(model.params, grad, model.optim_state, cfg.optim, None,
                                       noise_scale=2.0 * cfg.sigma_sq / n, z=z)
    return _finish(model, params, state, cfg)


def dqn_update(model: QModel, buffer: Buffer, cfg: AgentConfig, rng: Streams | np.random.Generator) -> QModel:
    """Same objective and minibatch as the Langevin update, plain Adam, no noise."""
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot update from an empty buffer")
    if isinstance(rng, Streams):
        rng = rng.minibatch
    b = buffer.sample_batch(cfg.batch, rng)
    _, grad = _gradient(model, buffer.table, b, cfg.sigma_sq * cfg.lam / n)
    params, state = adam_step(model.params, grad, model.optim_state, cfg.optim)
    return _finish(model, params, state, cfg)


def greedy_choice(q: np.ndarray, rng: np.random.Generator) -> int:
    best = np.flatnonzero(q == q.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def select_action(model: QModel, observation, epsilon: float, rng: np.random.Generator,
                  table: ObservationTable | None = None) -> int:
    """epsilon-greedy on the combined Q-values with uniform tie-breaking.

    ``observation`` is either an observation vector or, with ``table``, a row index.
    """
    if table is None:
        table = ObservationTable(model.spec.input_dim)
        observation = table.intern(observation)
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(model.spec.output_dim))
    return greedy_choice(model.q_values(table, int(observation)), rng)


def _update_count(cfg: AgentConfig, steps: int) -> int:
    # round before ceil so e.g. 0.1 * 30 does not become 4
    return math.ceil(round(cfg.updates_per_env_step * steps, 9))


class ValueAgent:
    """A single DQN or Langevin DQN learner with its own buffer and random streams."""

    def __init__(self, cfg: AgentConfig, seed: int | Streams):
        self.cfg = cfg
        self.streams = seed if isinstance(seed, Streams) else Streams(seed)
        self.table = ObservationTable(cfg.spec.input_dim)
        self.buffer = Buffer(cfg.buffer_capacity, self.table)
        self.model = QModel.initialize(cfg.spec, self.streams.get("init"), self.streams.get("prior"),
                                       cfg.prior_scale)

    def update(self):
        if self.cfg.is_langevin:
            langevin_dqn_update(self.model, self.buffer, self.cfg, self.streams)
        else:
            dqn_update(self.model, self.buffer, self.cfg, self.streams)

    def update_phase(self, count: int):
        if len(self.buffer) < self.cfg.min_replay:
            return
        for _ in range(count):
            self.update()

    def epsilon_at(self, episode: int, episodes: int) -> float:
        if self.cfg.epsilon_decay:
            return self.cfg.epsilon_start * max(0.0, 1.0 - (episode - 1) / max(episodes, 1))
        return self.cfg.epsilon

    def begin_episode(self, episode: int, episodes: int):
        self._eps = self.epsilon_at(episode, episodes)

    def act(self, row: int) -> int:
        return select_action(self.model, row, self._eps, self.streams.action, self.table)

    def observe(self, s: int, a: int, r: float, s2: int, terminal: bool):
        self.buffer.add_indexed(s, a, r, s2, terminal)

    def q_table(self, rows) -> np.ndarray:
        return self.model.combined(self.model.params, self.table, np.asarray(rows, dtype=np.int64))


def _rollout(env, agent, episode: int, episodes: int, prev_len: int, cfg: AgentConfig):
    if cfg.inter_episodic:
        agent.update_phase(_update_count(cfg, prev_len))
    agent.begin_episode(episode, episodes)
    table = agent.table
    s = table.intern(env.reset())
    total, steps, credit, done = 0.0, 0, 0.0, False
    while not done:
        a = agent.act(s)
        obs, r, done = env.step(a)
        s2 = table.intern(obs)
        agent.observe(s, a, r, s2, done)
        total += r
        steps += 1
        s = s2
        if not cfg.inter_episodic:
            credit += cfg.updates_per_env_step
            agent.update_phase(int(credit))
            credit -= int(credit)
    return total, steps


def _run(env, agent, episodes: int, callback=None, stop_when_solved=False) -> RunLog:
    from .metrics import learning_time

    log = RunLog(env.optimal_return)
    prev_len = 0
    for episode in range(1, episodes + 1):
        ret, prev_len = _rollout(env, agent, episode, episodes, prev_len, agent.cfg)
        log.append(ret)
        if callback is not None and callback(episode, agent, log):
            break
        if stop_when_solved and learning_time(log) is not None:
            break
    return log


def run_greedy_value_rl(env, agent: ValueAgent, episodes: int, rng=None, callback=None,
                        stop_when_solved: bool = False) -> RunLog:
    """Update phase at each episode start, then an (epsilon-)greedy rollout into the buffer.

    The number of updates is ``ceil(updates_per_env_step * previous episode length)``.
    ``callback(episode, agent, log)`` runs after every episode; a truthy
    return value ends the run. ``rng`` is
    accepted for interface symmetry; all randomness comes from the agent's streams.
    """
    return _run(env, agent, episodes, callback, stop_when_solved)


def bandit_langevin_update(model: QModel, buffer: Buffer, cfg: AgentConfig, rng: Streams) -> QModel:
    """Plain (unpreconditioned) Langevin SGD step on ``(Q(s0, a) - r)^2``.

    Uses the sigma-scaled form: step ``alpha`` on the mean squared error plus
    ``sigma_sq * lam * |theta|^2 / |D|``, noise ``sqrt(2 alpha sigma_sq / |D|)``.
    Adam preconditioning is avoided here because output biases of arms never
    pulled have an exactly zero gradient and would receive noise of order
    ``1/sqrt(eps_stab)``.
    """
    n = len(buffer)
    if n == 0:
        raise ValueError("cannot update from an empty buffer")
    b = buffer.sample_batch(cfg.batch, rng.minibatch)
    _, grad = _gradient(model, buffer.table, b, cfg.sigma_sq * cfg.lam / n)
    sigma_sq = cfg.sigma_sq if cfg.noise else 0.0
    model.params = langevin_sgd_step(model.params, grad, cfg.optim.alpha, n, sigma_sq, rng.noise)
    model.updates += 1
    return model


def bandit_langevin_run(bandit, agent: ValueAgent, episodes: int, rng=None) -> RunLog:
    """Greedy single-step episodes; regret is measured against the best arm mean."""
    table = agent.table
    log = RunLog(bandit.optimal_return)
    best = bandit.optimal_return
    s = table.intern(bandit.reset())
    for _ in range(episodes):
        if len(agent.buffer):
            for _ in range(_update_count(agent.cfg, 1)):
                bandit_langevin_update(agent.model, agent.buffer, agent.cfg, agent.streams)
        a = select_action(agent.model, s, 0.0, agent.streams.action, table)
        obs, r, done = bandit.step(a)
        agent.observe(s, a, r, table.intern(obs), True)
        log.append(r, best - bandit.arm_means[a])
    return log


class EnsembleState:
    """M members with randomized priors; each new transition enters buffer k with probability p."""

    def __init__(self, cfg: AgentConfig, seed: int | Streams):
        self.cfg = cfg
        self.streams = seed if isinstance(seed, Streams) else Streams(seed)
        self.table = ObservationTable(cfg.spec.input_dim)
        m = cfg.ensemble_size
        self.models = [
            QModel.initialize(cfg.spec, self.streams.get("init", k), self.streams.get("prior", k),
                              cfg.prior_scale)
            for k in range(m)
        ]
        if cfg.insertion_prob >= 1.0:
            shared = Buffer(cfg.buffer_capacity, self.table)
            self.buffers = [shared] * m
        else:
            self.buffers = [Buffer(cfg.buffer_capacity, self.table) for _ in range(m)]
        self.insertion_prob = cfg.insertion_prob
        self.active_model = 0

    @property
    def model(self) -> QModel:
        return self.models[self.active_model]

    def update_phase(self, count: int):
        cfg = self.cfg
        for k, (model, buf) in enumerate(zip(self.models, self.buffers)):
            if len(buf) < cfg.min_replay:
                continue
            mb = self.streams.get("minibatch", k)
            for _ in range(count):
                if cfg.is_langevin:
                    langevin_dqn_update(model, buf, cfg, mb, self.streams.get("noise", k))
                else:
                    dqn_update(model, buf, cfg, mb)

    def begin_episode(self, episode: int, episodes: int):
        self.active_model = int(self.streams.model_draw.integers(len(self.models)))

    def act(self, row: int) -> int:
        return greedy_choice(self.model.q_values(self.table, row), self.streams.action)

    def observe(self, s: int, a: int, r: float, s2: int, terminal: bool):
        if self.insertion_prob >= 1.0:
            self.buffers[0].add_indexed(s, a, r, s2, terminal)
            return
        keep = self.streams.insertion.random(len(self.buffers)) < self.insertion_prob
        for buf, k in zip(self.buffers, keep):
            if k:
                buf.add_indexed(s, a, r, s2, terminal)

    def q_table(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        return self.model.combined(self.model.params, self.table, rows)


def run_ensemble_value_rl(env, ensemble: EnsembleState, episodes: int, rng=None, callback=None,
                          stop_when_solved: bool = False) -> RunLog:
    """Update every member on its own buffer, act greedily with one member drawn per episode."""
    return _run(env, ensemble, episodes, callback, stop_when_solved)


def make_agent(cfg: AgentConfig, seed: int | Streams):
    return EnsembleState(cfg, seed) if cfg.kind in ENSEMBLE_KINDS else ValueAgent(cfg, seed)


def run_agent(env, agent, episodes: int, callback=None, stop_when_solved: bool = False) -> RunLog:
    if isinstance(agent, EnsembleState):
        return run_ensemble_value_rl(env, agent, episodes, callback=callback,
                                     stop_when_solved=stop_when_solved)
    return run_greedy_value_rl(env, agent, episodes, callback=callback, stop_when_solved=stop_when_solved)


__all__ = [
    "AgentConfig", "QModel", "TDTerms", "ValueAgent", "EnsembleState", "Transition",
    "default_config", "td_loss", "langevin_dqn_update", "dqn_update", "select_action",
    "run_greedy_value_rl", "bandit_langevin_update", "bandit_langevin_run", "run_ensemble_value_rl", "make_agent", "run_agent",
]
