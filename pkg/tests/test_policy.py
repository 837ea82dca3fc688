import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bidsbandit.errors import NotAtBoundary
from bidsbandit.geometry import BinId, bin_extent, make_schedule
from bidsbandit.policy import BidsPolicy, EstimateThenBids, play, threshold_U
from bidsbandit.sir import GaussianScore


def _policy(T=10**6, M=5, n_arms=2):
    s = make_schedule(T, M, 1.0)
    return BidsPolicy(s, (0.0, 1.0), [1.0], n_arms)


def test_threshold_examples():
    assert threshold_U(32, 1000, 0.5) == pytest.approx(2.62826, abs=5e-6)
    assert threshold_U(32, 1000, 0.5) == pytest.approx(float(oracles.threshold(32, 1000, 0.5)), rel=1e-14)
    assert threshold_U(0, 1000, 0.5) == math.inf
    assert threshold_U(10, 1, 0.25) == math.inf
    T, w = 5000, 0.1
    assert threshold_U(8 * math.log(2 * T * w), T, w) == pytest.approx(2.0, rel=1e-14)


def test_cyclic_pulls_then_frozen_survivor():
    p = _policy()
    x = np.array([0.1])
    arms = []
    for _ in range(3):
        a = p.choose_arm(x)
        p.record_reward(x, a, 0.0)
        arms.append(a)
    assert arms == [0, 1, 0]
    b = p.covering_bin(x)
    b.frozen, b.active = True, [1]
    assert [p.choose_arm(x) for _ in range(3)] == [1, 1, 1]


def test_record_reward_accumulates():
    p = _policy()
    x = np.array([0.5])
    p.record_reward(x, 0, 0.2)
    p.record_reward(x, 0, 0.6)
    b = p.covering_bin(x)
    assert b.m == 2 and b.counts[0] == 2 and b.means()[0] == pytest.approx(0.4)


def _at_first_boundary(p, fill):
    """Advance ``p`` to its first grid point; ``fill(bin)`` sets bin statistics."""
    for b in p.live_bins:
        fill(b)
    p.t = p.grid[1]


def test_end_batch_gap_above_threshold_freezes():
    p = _policy()

    def fill(b):
        b.m, b.counts[:] = 20000, 10000
        b.sums[:] = [0.9 * 10000, 0.2 * 10000]

    _at_first_boundary(p, fill)
    assert threshold_U(20000, p.horizon, p.schedule.width(1)) < 0.7
    rep = p.end_batch()
    assert all(r["eliminated_arms"] == [1] and r["survivors"] == [0] and not r["split"] for r in rep)
    assert all(b.frozen for b in p.bins)


def test_end_batch_small_gap_splits():
    p = _policy()

    def fill(b):
        b.m, b.counts[:] = 200, 100
        b.sums[:] = [50.0, 45.0]

    _at_first_boundary(p, fill)
    rep = p.end_batch()
    assert all(r["split"] and r["survivors"] == [0, 1] for r in rep)
    assert len(p.live_bins) == 5 * 2
    assert all(b.layer == 2 and b.active == [0, 1] for b in p.live_bins)


def test_end_batch_unvisited_bin_splits():
    p = _policy()
    _at_first_boundary(p, lambda b: None)
    rep = p.end_batch()
    assert all(r["split"] and not r["eliminated_arms"] for r in rep)


def test_end_batch_off_grid():
    p = _policy()
    p.t = p.grid[1] - 1
    with pytest.raises(NotAtBoundary):
        p.end_batch()


def _constant_run(seed, T=200_000, M=5, gaps=(0.7, 0.0)):
    rng = np.random.default_rng(seed)
    s = make_schedule(T, M, 1.0)
    p = BidsPolicy(s, (0.0, 1.0), [1.0])
    X = rng.uniform(0, 1, (T, 1))
    means = np.tile(np.array(gaps), (T, 1))
    noise = rng.uniform(-0.5, 0.5, T)
    arms = play(p, X, means, noise)
    return p, arms


def test_batched_matches_per_round():
    rng = np.random.default_rng(3)
    T = 3000
    s = make_schedule(T, 4, 1.0, c_B=0.2)
    assert len(set(s.grid)) == len(s.grid)
    X = rng.normal(size=(T, 3))
    beta = np.array([0.6, 0.8, 0.0])
    means = np.column_stack([np.sin(X @ beta), 0.2 + 0 * X[:, 0]])
    noise = rng.normal(0, 0.1, T)

    a = BidsPolicy(s, (-2, 2), beta)
    arms_batched = play(a, X, means, noise)

    b = BidsPolicy(s, (-2, 2), beta)
    arms_single = np.empty(T, dtype=int)
    for t in range(T):
        k = b.choose_arm(X[t])
        b.record_reward(X[t], k, means[t, k] + noise[t])
        arms_single[t] = k
        while t + 1 < T and t + 1 == b.next_boundary():
            b.end_batch()
    assert np.array_equal(arms_batched, arms_single)
    assert a.reports == b.reports


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(3, 6), st.sampled_from([0.05, 0.2, 1.0]))
def test_coverage_fairness_single_event(seed, M, c_B):
    rng = np.random.default_rng(seed)
    T = 4000
    s = make_schedule(T, M, 1.0, (0, 1), c_B=c_B)
    p = BidsPolicy(s, (0, 1), [1.0])
    X = rng.uniform(0, 1, (T, 1))
    means = np.column_stack([X[:, 0], 1 - X[:, 0]])
    noise = rng.uniform(-0.5, 0.5, T)
    t = 0
    while t < T:
        end = min(p.next_boundary(), T) if p.next_boundary() > t else t
        a = p.choose_batch(X[t:end])
        p.record_batch(X[t:end], a, means[np.arange(t, end), a] + noise[t:end])
        t = end
        for b in p.live_bins:
            c = b.counts[b.active]
            assert c.max() - c.min() <= 1
        covered = sorted((bin_extent(BinId(b.layer, b.index), s, (0, 1)) for b in p.live_bins + p.frozen_bins))
        assert covered[0].lower == 0 and covered[-1].upper == 1
        assert all(x.upper == pytest.approx(y.lower, abs=1e-12) for x, y in zip(covered, covered[1:]))
        if t < T:
            p.end_batch()
    events = Counter((r["bin_layer"], r["bin_index"]) for r in p.reports)
    assert max(events.values(), default=1) == 1


def first_batch_eliminations(seed, T=10**6, M=5, c_B=15.0, gap=0.7):
    """Two constant arms ``(gap, 0)`` with noise uniform on [-0.5, 0.5]; run batch 1 only."""
    rng = np.random.default_rng(seed)
    s = make_schedule(T, M, 1.0, c_B=c_B)
    p = BidsPolicy(s, (0.0, 1.0), [1.0])
    n = s.grid[1] + 1
    X = rng.uniform(0, 1, (n, 1))
    play(p, X, np.tile([gap, 0.0], (n, 1)), rng.uniform(-0.5, 0.5, n))
    return s, p


def test_first_batch_visits_meet_separation_condition():
    s = make_schedule(10**6, 5, 1.0, c_B=15.0)
    m = s.grid[1] / s.n_bins(1)
    assert m >= 128 * math.log(2 * s.T * s.width(1)) / 0.49


def test_separation_soundness_quick():
    ok = 0
    for seed in range(20):
        _, p = first_batch_eliminations(seed)
        ok += all(r["survivors"] == [0] and r["eliminated_arms"] == [1] for r in p.reports)
    assert ok >= 19


def test_deterministic_replay():
    p1, a1 = _constant_run(11)
    p2, a2 = _constant_run(11)
    assert np.array_equal(a1, a2) and p1.reports == p2.reports


def test_frozen_bins_regret_free_on_piecewise_constant_arms():
    rng = np.random.default_rng(4)
    s = make_schedule(10**6, 5, 1.0, c_B=15.0)
    p = BidsPolicy(s, (0.0, 1.0), [1.0])
    n = s.grid[1]
    X = rng.uniform(0, 1, (n + 5000, 1))
    # the better arm flips at 0.4, a layer-1 bin edge (b_0 = 5)
    best = (X[:, 0] >= 0.4).astype(int)
    means = np.zeros((len(X), 2))
    means[np.arange(len(X)), best] = 0.7
    arms = play(p, X, means, rng.uniform(-0.5, 0.5, len(X)))
    assert all(b.frozen for b in p.bins)
    assert np.array_equal(arms[n:], best[n:])


def test_estimate_then_bids_runs():
    rng = np.random.default_rng(0)
    T, d = 20000, 3
    beta = np.array([1.0, 2.0, 2.0]) / 3
    X = rng.normal(size=(T, d))
    u = X @ beta
    means = np.column_stack([np.tanh(u), -np.tanh(u)])
    pol = EstimateThenBids(T, 700, lambda n: make_schedule(n, 4, 1.0), 2, None, 10, GaussianScore(np.zeros(d), np.eye(d)))
    arms = play(pol, X, means, rng.normal(0, 0.1, T))
    assert pol.grid[1] == 700 and pol.grid[-1] == T
    assert np.array_equal(arms[:700], np.arange(700) % 2)
    assert abs(pol.direction @ beta) > 0.95
    assert all(r["batch"] >= 2 for r in pol.reports)
