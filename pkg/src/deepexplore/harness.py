"""Experiment orchestration: configs, deep-sea sweeps, summaries and CSV output."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace
from multiprocessing import get_context

import numpy as np

from .agents import KINDS, AgentConfig, default_config, make_agent, run_agent
from .checks import dithering_bound_check, posterior_check  # noqa: F401  (re-exported)
from .config import ConfigError, load_config
from .envs import DeepSea
from .metrics import NOT_REACHED, RunLog, deep_sea_score, learning_time, median_learning_time
from .optim import OptimConfig
from .rng import substream

EPISODE_HEADER = ["episode", "return", "regret", "cum_regret", "solved"]
SUMMARY_HEADER = ["depth", "updates_per_step", "seed", "learning_time", "solved"]
PLOT_HEADER = ["x", "series", "y"]

_SPEC_KEYS = {"activation", "hidden_units", "hidden_layers", "slope"}
_AGENT_KEYS = {f.name for f in fields(AgentConfig)} - {"spec", "optim", "kind"}
_OPTIM_KEYS = {f.name for f in fields(OptimConfig)}


@dataclass(frozen=True)
class ExperimentConfig:
    agent: str = "langevin"
    env: str = "deep_sea"
    episodes: int = 5000
    depths: tuple = (10,)
    updates_per_step: tuple = (1.0,)
    seeds: tuple = (0, 1, 2, 3, 4)
    budget: int = 5000
    stop_on_solve: bool = True
    sigma_depth_scaling: bool = True
    workers: int = 1
    out: str | None = None
    agent_overrides: dict = field(default_factory=dict)
    optim_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.agent not in KINDS:
            raise ConfigError(f"agent must be one of {KINDS}")
        if self.env != "deep_sea":
            raise ConfigError("only env.name = deep_sea is supported for sweeps")
        if self.episodes < 0 or self.budget < 1:
            raise ConfigError("episodes must be >= 0 and budget >= 1")
        if not self.depths or any(int(d) < 1 for d in self.depths):
            raise ConfigError("depths must be a nonempty list of positive integers")
        if not self.updates_per_step or any(not u > 0 for u in self.updates_per_step):
            raise ConfigError("updates_per_step values must be positive")
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed (trials >= 1)")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = set(self.agent_overrides) - _AGENT_KEYS - _SPEC_KEYS
        if bad:
            raise ConfigError(f"unknown agent keys: {sorted(bad)}")
        bad = set(self.optim_overrides) - _OPTIM_KEYS
        if bad:
            raise ConfigError(f"unknown optim keys: {sorted(bad)}")
        # fail early on values the agent config would reject
        try:
            self.agent_config(int(self.depths[0]), float(self.updates_per_step[0]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def trials(self) -> int:
        return len(self.seeds)

    def agent_config(self, depth: int, updates_per_step: float) -> AgentConfig:
        over = dict(self.agent_overrides)
        spec_over = {k: over.pop(k) for k in list(over) if k in _SPEC_KEYS}
        base_sigma = over.pop("sigma_sq", None)
        cfg = default_config(self.agent, depth * depth, 2, depth=depth,
                             scale_sigma_with_depth=self.sigma_depth_scaling)
        if base_sigma is not None:
            scale = depth if self.agent == "langevin" and self.sigma_depth_scaling else 1
            over["sigma_sq"] = float(base_sigma) * scale
        if spec_over:
            over["spec"] = replace(cfg.spec, **spec_over)
        if self.optim_overrides:
            over["optim"] = replace(cfg.optim, **self.optim_overrides)
        over["updates_per_env_step"] = float(updates_per_step)
        return replace(cfg, **over)


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def experiment_from_dict(values: dict, **cli) -> ExperimentConfig:
    """Build a config from parsed ``section.key`` values plus CLI overrides (``None`` = unset)."""
    exp, agent, optim = {}, {}, {}
    base_seed, trials = 0, None
    for key, v in values.items():
        section, name = key.split(".", 1)
        if section == "experiment":
            if name in ("depths", "updates_per_step", "seeds"):
                exp[name] = tuple(_listify(v))
            elif name == "trials":
                trials = int(v)
            elif name == "seed":
                base_seed = int(v)
            elif name in ("agent", "episodes", "budget", "stop_on_solve", "sigma_depth_scaling",
                          "workers", "out"):
                exp[name] = v
            else:
                raise ConfigError(f"unknown key {key!r}")
        elif section == "env":
            if name != "name":
                raise ConfigError(f"unknown key {key!r}")
            exp["env"] = v
        elif section == "agent":
            if name == "kind":
                exp["agent"] = v
            else:
                agent[name] = v
        elif section == "optim":
            optim[name] = v
        else:
            raise ConfigError(f"unknown section in {key!r}")
    if cli.get("agent") is not None:
        exp["agent"] = cli["agent"]
    if cli.get("episodes") is not None:
        exp["episodes"] = cli["episodes"]
    if cli.get("depth") is not None:
        exp["depths"] = (cli["depth"],)
    if cli.get("updates_per_step") is not None:
        exp["updates_per_step"] = (cli["updates_per_step"],)
    if cli.get("out") is not None:
        exp["out"] = cli["out"]
    if cli.get("seed") is not None:
        base_seed = cli["seed"]
        exp.pop("seeds", None)
    if cli.get("trials") is not None:
        trials = cli["trials"]
        exp.pop("seeds", None)
    if "seeds" not in exp:
        n = 5 if trials is None else trials
        if n < 1:
            raise ConfigError("trials must be >= 1")
        exp["seeds"] = tuple(range(base_seed, base_seed + n))
    try:
        exp["depths"] = tuple(int(d) for d in exp.get("depths", (10,)))
        exp["updates_per_step"] = tuple(float(u) for u in exp.get("updates_per_step", (1.0,)))
        exp["seeds"] = tuple(int(s) for s in exp["seeds"])
        for k in ("episodes", "budget", "workers"):
            if k in exp:
                exp[k] = int(exp[k])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(agent_overrides=agent, optim_overrides=optim, **exp)


def load_experiment(path, **cli) -> ExperimentConfig:
    return experiment_from_dict(load_config(path) if path else {}, **cli)


@dataclass
class TrialResult:
    depth: int
    updates_per_step: float
    seed: int
    returns: list
    learning_time: int | None
    optimal_return: float

    def log(self) -> RunLog:
        return RunLog(self.optimal_return, list(self.returns))


def run_trial(exp: ExperimentConfig, depth: int, updates_per_step: float, seed: int) -> TrialResult:
    env = DeepSea(depth, rng=substream(seed, "env_mask"))
    agent = make_agent(exp.agent_config(depth, updates_per_step), seed)
    log = run_agent(env, agent, exp.episodes, stop_when_solved=exp.stop_on_solve)
    return TrialResult(depth, updates_per_step, seed, log.returns, learning_time(log), env.optimal_return)


def _trial_args(exp: ExperimentConfig):
    return [(exp, d, u, s) for d in exp.depths for u in exp.updates_per_step for s in exp.seeds]


def _star_trial(args):
    return run_trial(*args)


@dataclass
class SweepSummary:
    trials: list
    budget: int

    def solved(self, t: TrialResult) -> bool:
        return t.learning_time is not None and t.learning_time <= self.budget

    def _group(self):
        out = {}
        for t in self.trials:
            out.setdefault((t.depth, t.updates_per_step), []).append(t)
        return out

    @property
    def solved_fraction(self) -> dict:
        return {k: sum(self.solved(t) for t in v) / len(v) for k, v in self._group().items()}

    @property
    def median_learning_time(self) -> dict:
        return {k: median_learning_time([t.learning_time for t in v]) for k, v in self._group().items()}

    @property
    def scores(self) -> dict:
        """Deep-sea score per updates-per-step value."""
        out = {}
        for u in sorted({t.updates_per_step for t in self.trials}):
            sub = [t for t in self.trials if t.updates_per_step == u]
            times = {}
            for t in sub:
                times.setdefault(t.depth, []).append(t.learning_time)
            out[u] = deep_sea_score(times, sorted(times), self.budget)
        return out


def fmt_float(x: float) -> str:
    return repr(float(x))


def fmt_ups(u: float) -> str:
    return format(float(u), "g")


def episode_csv_name(depth: int, ups: float, seed: int) -> str:
    return f"episodes_depth{depth}_ups{fmt_ups(ups)}_seed{seed}.csv"


def write_episode_csv(log: RunLog, path) -> None:
    regrets, cum, solved = log.regrets, log.cum_regret, log.solved
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_HEADER)
        for i, ret in enumerate(log.returns):
            w.writerow([i + 1, fmt_float(ret), fmt_float(regrets[i]), fmt_float(cum[i]), int(solved[i])])


def write_summary_csv(summary: SweepSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for t in summary.trials:
            lt = "NA" if t.learning_time is NOT_REACHED else t.learning_time
            w.writerow([t.depth, fmt_ups(t.updates_per_step), t.seed, lt, int(summary.solved(t))])


def read_summary_csv(path) -> list:
    """Rows of a summary CSV as dicts with typed values."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_HEADER:
            raise ValueError(f"{path}: not a summary file (header {reader.fieldnames})")
        for r in reader:
            rows.append({
                "depth": int(r["depth"]),
                "updates_per_step": float(r["updates_per_step"]),
                "seed": int(r["seed"]),
                "learning_time": None if r["learning_time"] == "NA" else int(r["learning_time"]),
            })
    return rows


def score_summary_rows(rows, budget: int) -> dict:
    trials = [TrialResult(r["depth"], r["updates_per_step"], r["seed"], [], r["learning_time"], 0.99)
              for r in rows]
    return SweepSummary(trials, budget).scores


def run_sweep(exp: ExperimentConfig, out: str | None = None, write_episodes: bool = True) -> SweepSummary:
    """Run every (depth, updates, seed) trial and write CSVs under ``out`` (if given).

    Output order and bytes depend only on the config: trials are keyed by
    their (depth, updates, seed) and each derives its random streams from its seed.
    """
    out = out if out is not None else exp.out
    if out is not None:
        os.makedirs(out, exist_ok=True)
    args = _trial_args(exp)
    if exp.workers > 1 and len(args) > 1:
        with get_context("spawn").Pool(min(exp.workers, len(args))) as pool:
            results = pool.map(_star_trial, args, chunksize=1)
    else:
        results = [run_trial(*a) for a in args]
    summary = SweepSummary(results, exp.budget)
    if out is not None:
        if write_episodes:
            ep_dir = os.path.join(out, "episodes")
            os.makedirs(ep_dir, exist_ok=True)
            for t in results:
                write_episode_csv(t.log(), os.path.join(ep_dir, episode_csv_name(t.depth, t.updates_per_step, t.seed)))
        write_summary_csv(summary, os.path.join(out, "summary.csv"))
        emit_plot_data(solved_fraction_rows(summary), os.path.join(out, "plot_solved_fraction.csv"))
        emit_plot_data(median_learning_time_rows(summary), os.path.join(out, "plot_median_learning_time.csv"))
        emit_plot_data(score_rows(summary), os.path.join(out, "plot_score.csv"))
    return summary


def solved_fraction_rows(summary: SweepSummary):
    """(depth, "updates=<u>", fraction of seeds solved) rows."""
    return [(d, f"updates={fmt_ups(u)}", f) for (d, u), f in sorted(summary.solved_fraction.items())]


def median_learning_time_rows(summary: SweepSummary):
    """(updates per step, "depth=<d>", median learning time; inf if not reached) rows."""
    return [(u, f"depth={d}", m) for (d, u), m in sorted(summary.median_learning_time.items(),
                                                           key=lambda kv: (kv[0][1], kv[0][0]))]


def score_rows(summary: SweepSummary):
    return [(u, "score", s) for u, s in summary.scores.items()]


def _cell(v) -> str:
    if isinstance(v, float):
        return fmt_ups(v) if v.is_integer() or math.isinf(v) else repr(v)
    return str(v)


def emit_plot_data(data, path) -> None:
    """Write ``x,series,y`` rows. ``data`` is a RunLog (cumulative regret per episode) or row triples."""
    if isinstance(data, RunLog):
        rows = [(i + 1, "cum_regret", float(c)) for i, c in enumerate(data.cum_regret)]
    elif isinstance(data, SweepSummary):
        rows = solved_fraction_rows(data)
    else:
        rows = list(data)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for x, s, y in rows:
            w.writerow([_cell(x), s, _cell(y)])


@dataclass
class UncertaintyTrace:
    """Per-episode Q-values over every deep-sea cell plus cumulative visit counts."""

    depth: int
    q: np.ndarray  # (episodes, N, N, A)
    visits: np.ndarray  # (episodes, N, N) cumulative
    log: RunLog

    def window_map(self, end_episode: int, window: int = 10, clip: float = 50.0) -> np.ndarray:
        from .tabular import uncertainty_map

        if end_episode < window:
            raise ValueError("not enough episodes for the window")
        return uncertainty_map(self.q[end_episode - window:end_episode], clip)


def reachable_cells(depth: int) -> np.ndarray:
    r, c = np.indices((depth, depth))
    return c <= r


def deep_sea_uncertainty_run(depth: int, episodes: int, seed: int, updates_per_step: float,
                             stop_after_solved: int | None = None, **overrides) -> UncertaintyTrace:
    """Langevin DQN on deep sea, recording Q-values of all cells after every episode.

    With ``stop_after_solved = k`` the run ends ``k`` episodes after the learning time.
    """
    env = DeepSea(depth, rng=substream(seed, "env_mask"))
    cfg = default_config("langevin", env.observation_dim, 2, depth=depth,
                         updates_per_env_step=updates_per_step, **overrides)
    agent = make_agent(cfg, seed)
    eye = np.eye(depth * depth)
    qs, visits = [], []
    state = {"lt": None}

    def on_episode(ep, ag, log):
        qs.append(ag.model.evaluate(eye).reshape(depth, depth, -1))
        b = ag.buffer.batch_at(np.arange(len(ag.buffer)))
        cells = ag.table.rows[b.states].argmax(axis=1)
        visits.append(np.bincount(cells, minlength=depth * depth).reshape(depth, depth))
        if state["lt"] is None:
            state["lt"] = learning_time(log)
        return stop_after_solved is not None and state["lt"] is not None and ep >= state["lt"] + stop_after_solved

    log = run_agent(env, agent, episodes, callback=on_episode)
    return UncertaintyTrace(depth, np.array(qs), np.array(visits), log)
