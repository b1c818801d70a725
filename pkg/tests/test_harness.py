import csv
import filecmp
import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepexplore.config import ConfigError, format_config, parse_config
from deepexplore.harness import (
    EPISODE_HEADER,
    SUMMARY_HEADER,
    ExperimentConfig,
    SweepSummary,
    TrialResult,
    emit_plot_data,
    experiment_from_dict,
    read_summary_csv,
    reachable_cells,
    run_sweep,
    score_summary_rows,
)
from deepexplore.metrics import RunLog, deep_sea_score, learning_time, median_learning_time


def scan_learning_time(regrets):
    """Oracle: plain loop over episodes."""
    total = 0.0
    for l, r in enumerate(regrets, 1):
        total += r
        if total < 0.8 * l:
            return l
    return None


def test_learning_time_examples():
    assert learning_time([0.0] * 5) == 1
    assert learning_time([0.99] * 200) is None
    assert learning_time([]) is None
    alt = [0.0, 0.99] * 10
    assert learning_time(alt) == scan_learning_time(alt) == 1
    alt = [0.99, 0.0] * 10
    assert learning_time(alt) == scan_learning_time(alt) == 2


def test_learning_time_strict_inequality():
    # cum regret exactly 0.8 * l does not count
    assert learning_time([0.8, 0.8, 0.0]) == 3
    assert learning_time([0.8]) is None


def test_learning_time_from_runlog():
    log = RunLog(0.99)
    for r in [-0.01, -0.005, 0.99, 0.99, 0.99]:
        log.append(r)
    np.testing.assert_allclose(log.regrets, [1.0, 0.995, 0, 0, 0])
    assert learning_time(log) == scan_learning_time(log.regrets) == 3
    assert list(log.solved) == [False, False, True, True, True]
    assert np.all(np.diff(log.cum_regret) >= 0)


def test_runlog_explicit_regrets():
    log = RunLog(1.0)
    log.append(0.2, 0.0)
    log.append(-0.4, 1.0)
    assert list(log.regrets) == [0.0, 1.0]


@given(st.lists(st.floats(0, 2), max_size=60))
def test_learning_time_matches_scan(regrets):
    assert learning_time(regrets) == scan_learning_time(regrets)


@given(st.lists(st.tuples(st.floats(0, 2), st.floats(0, 1)), max_size=60))
def test_learning_time_monotone_under_dominance(pairs):
    a = [p for p, _ in pairs]
    b = [p + q for p, q in pairs]  # pointwise larger regret, so larger cumulative regret
    la, lb = learning_time(a), learning_time(b)
    assert (math.inf if la is None else la) <= (math.inf if lb is None else lb)


def test_median_learning_time():
    assert median_learning_time([10, None, 30]) == 30
    assert median_learning_time([None, None, 5]) == math.inf
    assert median_learning_time([]) == math.inf


def test_deep_sea_score_examples():
    depths = list(range(10, 21))
    assert len(depths) == 11
    solved = {d: [100] * 5 for d in depths}
    assert deep_sea_score(solved, depths, 5000) == 1.0
    assert deep_sea_score({d: [None] * 5 for d in depths}, depths, 5000) == 0.0
    mixed = {d: ([100] * 5 if i < 6 else [None] * 5) for i, d in enumerate(depths)}
    assert deep_sea_score(mixed, depths, 5000) == pytest.approx(6 / 11)
    # median across seeds: 2 of 5 solved is not solved
    assert deep_sea_score({10: [1, 1, None, None, None]}, [10], 5000) == 0.0
    assert deep_sea_score({10: [6000] * 5}, [10], 5000) == 0.0
    with pytest.raises(ValueError):
        deep_sea_score({}, [], 5000)


def test_parse_config_values():
    text = """
    # a comment
    experiment.agent = langevin
    experiment.depths = 10, 12 ,14   # trailing comment
    experiment.stop_on_solve = false
    agent.sigma_sq = 5e-3
    optim.alpha = 0.01
    env.name = "deep_sea"
    """
    c = parse_config(text)
    assert c == {"experiment.agent": "langevin", "experiment.depths": [10, 12, 14],
                 "experiment.stop_on_solve": False, "agent.sigma_sq": 0.005, "optim.alpha": 0.01,
                 "env.name": "deep_sea"}


@pytest.mark.parametrize("text", ["experiment.agent", "agent = dqn", "a.b = 1\na.b = 2", "a.b =", "1x.y = 2"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


_name = st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True)
_scalar = st.one_of(st.integers(-10 ** 6, 10 ** 6), st.booleans(),
                    st.floats(allow_nan=False, allow_infinity=False, width=64).filter(lambda x: x != int(x)))


@given(st.dictionaries(st.tuples(_name, _name).map(".".join), st.one_of(_scalar, st.lists(_scalar, min_size=2, max_size=4)),
                       max_size=6))
def test_config_roundtrip(values):
    assert parse_config(format_config(values)) == values


def test_experiment_from_dict_and_overrides():
    exp = experiment_from_dict({"experiment.agent": "langevin", "experiment.depths": [10, 12],
                                "experiment.trials": 3, "experiment.seed": 7, "agent.sigma_sq": 0.01,
                                "optim.alpha": 0.02})
    assert exp.seeds == (7, 8, 9) and exp.depths == (10, 12)
    cfg = exp.agent_config(12, 2.0)
    assert cfg.sigma_sq == pytest.approx(0.12) and cfg.optim.alpha == 0.02 and cfg.updates_per_env_step == 2.0
    exp = experiment_from_dict({"experiment.seeds": [3, 4]}, depth=6, trials=2, seed=100, agent="dqn",
                               episodes=9, updates_per_step=4)
    assert exp.seeds == (100, 101) and exp.depths == (6,) and exp.agent == "dqn"
    assert exp.episodes == 9 and exp.updates_per_step == (4.0,)
    exp = experiment_from_dict({"agent.kind": "boot", "agent.hidden_units": 8})
    assert exp.agent == "boot" and exp.agent_config(10, 1).spec.hidden_units == 8
    assert exp.trials == 5


@pytest.mark.parametrize("values", [
    {"experiment.agent": "sarsa"},
    {"experiment.bogus": 1},
    {"nosection.x": 1},
    {"agent.nonsense": 1},
    {"optim.gamma": 1},
    {"experiment.seeds": [1, 1]},
    {"experiment.trials": 0},
    {"experiment.depths": [0]},
    {"experiment.updates_per_step": [0]},
    {"env.name": "cartpole"},
    {"experiment.agent": "langevin", "agent.epsilon": 0.1},
    {"experiment.episodes": "many"},
])
def test_experiment_config_errors(values):
    with pytest.raises(ConfigError):
        experiment_from_dict(values)


def tiny_exp(**kw):
    base = dict(agent="langevin", episodes=4, depths=(3, 4), updates_per_step=(1.0,), seeds=(0, 1),
                agent_overrides={"hidden_units": 8, "batch": 16})
    base.update(kw)
    return ExperimentConfig(**base)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sweep_outputs_and_schema(tmp_path):
    summary = run_sweep(tiny_exp(), str(tmp_path))
    rows = read_rows(tmp_path / "summary.csv")
    assert rows[0] == SUMMARY_HEADER and len(rows) == 1 + 4
    eps = sorted(os.listdir(tmp_path / "episodes"))
    assert len(eps) == 4 and "episodes_depth3_ups1_seed0.csv" in eps
    ep = read_rows(tmp_path / "episodes" / "episodes_depth4_ups1_seed1.csv")
    assert ep[0] == EPISODE_HEADER and [r[0] for r in ep[1:]] == ["1", "2", "3", "4"]
    cum = np.cumsum([float(r[2]) for r in ep[1:]])
    np.testing.assert_allclose(cum, [float(r[3]) for r in ep[1:]])
    assert all(0.0 <= f <= 1.0 for f in summary.solved_fraction.values())
    assert all(0.0 <= s <= 1.0 for s in summary.scores.values())
    assert read_rows(tmp_path / "plot_solved_fraction.csv")[0] == ["x", "series", "y"]
    back = read_summary_csv(tmp_path / "summary.csv")
    assert score_summary_rows(back, 5000) == summary.scores


def test_sweep_thirty_runs(tmp_path):
    exp = tiny_exp(episodes=1, depths=(2, 3, 4, 5, 6, 7), seeds=(0, 1, 2, 3, 4))
    run_sweep(exp, str(tmp_path))
    assert len(os.listdir(tmp_path / "episodes")) == 30
    assert len(read_rows(tmp_path / "summary.csv")) == 31


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    files = [f for f in cmp.common_files]
    match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    sub = all(same_tree(os.path.join(a, d), os.path.join(b, d)) for d in cmp.common_dirs)
    return not mismatch and not errors and not cmp.left_only and not cmp.right_only and sub


def test_sweep_deterministic(tmp_path):
    exp = tiny_exp(episodes=6)
    run_sweep(exp, str(tmp_path / "a"))
    run_sweep(exp, str(tmp_path / "b"))
    assert same_tree(tmp_path / "a", tmp_path / "b")


@pytest.mark.slow
def test_parallel_equals_sequential(tmp_path):
    run_sweep(tiny_exp(episodes=5), str(tmp_path / "seq"))
    run_sweep(tiny_exp(episodes=5, workers=2), str(tmp_path / "par"))
    assert same_tree(tmp_path / "seq", tmp_path / "par")


def test_summary_na_for_unsolved(tmp_path):
    s = SweepSummary([TrialResult(10, 1.0, 0, [-0.01], None, 0.99),
                      TrialResult(10, 1.0, 1, [0.99], 1, 0.99)], 5000)
    from deepexplore.harness import write_summary_csv

    write_summary_csv(s, tmp_path / "s.csv")
    rows = read_rows(tmp_path / "s.csv")
    assert rows[1] == ["10", "1", "0", "NA", "0"] and rows[2] == ["10", "1", "1", "1", "1"]
    assert s.solved_fraction == {(10, 1.0): 0.5}


def test_read_summary_rejects_other_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_summary_csv(p)


def test_emit_plot_data(tmp_path):
    emit_plot_data([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == "x,series,y\n"
    log = RunLog(0.99, [0.99, -0.01])
    emit_plot_data(log, tmp_path / "log.csv")
    rows = read_rows(tmp_path / "log.csv")
    assert rows[1] == ["1", "cum_regret", "0"] and rows[2][0] == "2" and float(rows[2][2]) == pytest.approx(1.0)
    emit_plot_data([(50, "depth=10", math.inf)], tmp_path / "inf.csv")
    assert read_rows(tmp_path / "inf.csv")[1] == ["50", "depth=10", "inf"]


def test_reachable_cells():
    r = reachable_cells(4)
    assert r.sum() == 10 and r[3, 0] and not r[0, 3]
