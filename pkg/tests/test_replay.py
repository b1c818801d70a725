import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from deepexplore.replay import Buffer, ObservationTable, Transition, sample_minibatch


def tr(i, dim=3):
    s = np.zeros(dim)
    s[i % dim] = 1.0
    return Transition(s, i % 2, float(i), np.roll(s, 1), i % 5 == 0)


def make(capacity, dim=3):
    return Buffer(capacity, ObservationTable(dim))


def test_add_size_and_fifo():
    b = make(2)
    assert len(b) == 0
    b.add(tr(0))
    assert len(b) == 1
    b.add(tr(1)).add(tr(2))
    assert len(b) == 2
    assert [t.reward for t in b.items] == [1.0, 2.0]


def test_items_roundtrip():
    b = make(10)
    ts = [tr(i) for i in range(4)]
    for t in ts:
        b.add(t)
    assert b.items == ts


@given(cap=st.integers(1, 40), n=st.integers(0, 200))
def test_capacity_and_order_property(cap, n):
    b = make(cap)
    for i in range(n):
        b.add(tr(i))
    assert len(b) == min(cap, n)
    assert [t.reward for t in b.items] == [float(i) for i in range(max(0, n - cap), n)]


def test_no_eviction_below_capacity():
    b = make(100_000, dim=1)
    obs = np.ones(1)
    for i in range(50_000):
        b.add_indexed(0, 0, float(i), 0, False)
    assert len(b) == 50_000
    assert b.batch_at(np.array([0])).rewards[0] == 0.0


def test_sample_single_item():
    b = make(5)
    b.add(tr(1))
    batch = sample_minibatch(b, 128, np.random.default_rng(0))
    assert len(batch) == 128 and all(t == tr(1) for t in batch)


def test_sample_empty_errors():
    with pytest.raises(ValueError):
        sample_minibatch(make(3), 1, np.random.default_rng(0))


def test_sample_deterministic():
    b = make(50)
    for i in range(30):
        b.add(tr(i))
    x = b.sample_batch(128, np.random.default_rng(9))
    y = b.sample_batch(128, np.random.default_rng(9))
    assert all(np.array_equal(u, v) for u, v in zip(x, y))
    assert len(x.states) == 128


def test_sampling_uniform_chi_square():
    n = 16
    b = make(n, dim=1)
    for i in range(n):
        b.add_indexed(0, 0, float(i), 0, False)
    r = b.sample_batch(100_000, np.random.default_rng(4)).rewards.astype(int)
    counts = np.bincount(r, minlength=n)
    assert stats.chisquare(counts).pvalue > 0.01
    p = 1 / n
    assert np.all(np.abs(counts / 1e5 - p) < 3 * np.sqrt(p * (1 - p) / 1e5))


def test_uniform_after_wraparound():
    b = make(4, dim=1)
    for i in range(10):
        b.add_indexed(0, 0, float(i), 0, False)
    r = b.sample_batch(40_000, np.random.default_rng(1)).rewards
    assert set(np.unique(r)) == {6.0, 7.0, 8.0, 9.0}


def test_observation_table_dedup():
    t = ObservationTable(2)
    assert t.intern([1.0, 0.0]) == 0
    assert t.intern([0.0, 1.0]) == 1
    assert t.intern([1.0, 0.0]) == 0
    assert t.size == 2
    with pytest.raises(ValueError):
        t.intern([1.0])
    for i in range(200):
        t.intern([float(i), 2.0])
    assert t.rows.flags.c_contiguous and t.rows.shape == (202, 2)


def test_transition_equality():
    assert tr(3) == tr(3)
    assert tr(3) != tr(4)
