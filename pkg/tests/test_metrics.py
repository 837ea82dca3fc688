import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidsbandit.errors import InvalidParameter, NonPositiveRegret
from bidsbandit.metrics import RegretTrace, aggregate, fit_rate, stride_rows, write_aggregate_csv

gap_lists = st.lists(st.one_of(st.just(0.0), st.floats(0, 2)), min_size=1, max_size=200)


def test_accumulate_arithmetic():
    tr = RegretTrace()
    for g in (0.5, 0, 0.25):
        tr.accumulate(g)
    assert tr.cumulative.tolist() == [0.5, 0.5, 0.75]
    assert tr.inferior.tolist() == [1, 1, 2]


def test_always_optimal_play():
    tr = RegretTrace.from_gaps(np.zeros(100))
    assert not tr.cumulative.any() and not tr.inferior.any()


def test_constant_arms_wrong_arm():
    tr = RegretTrace.from_gaps(np.ones(50))
    assert tr.cumulative.tolist() == list(range(1, 51))
    assert tr.final_average == 1.0


def test_negative_gap_rejected():
    with pytest.raises(InvalidParameter):
        RegretTrace().accumulate(-0.1)
    with pytest.raises(InvalidParameter):
        RegretTrace.from_gaps([0.1, -0.1])


@settings(max_examples=100, deadline=None)
@given(gap_lists, gap_lists)
def test_trace_invariants(g1, g2):
    tr = RegretTrace.from_gaps(g1)
    tr.extend(g2)
    assert np.all(np.diff(tr.cumulative) >= 0)
    steps = np.diff(np.r_[0, tr.inferior])
    assert set(steps.tolist()) <= {0, 1}
    assert np.all(tr.inferior <= np.arange(1, len(tr) + 1))
    assert np.allclose(tr.cumulative, np.cumsum(g1 + g2))


def test_trace_csv(tmp_path):
    tr = RegretTrace.from_gaps([0.5, 0.0, 0.25])
    path = tmp_path / "r.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "cum_regret", "avg_regret", "inferior_count"]
    assert rows[3] == ["3", "0.75", "0.25", "2"]


def test_fit_rate_examples():
    T = np.array([1e3, 1e4, 1e5])
    assert fit_rate(T, T) == pytest.approx(1.0, abs=1e-12)
    assert fit_rate(T, np.sqrt(T)) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 100), st.integers(3, 8))
def test_fit_rate_power_law(expo, scale, n):
    T = np.geomspace(100, 1e6, n)
    assert fit_rate(T, scale * T**expo) == pytest.approx(expo, abs=1e-10)


def test_fit_rate_nonpositive():
    T = [10, 100, 1000]
    with pytest.raises(NonPositiveRegret):
        fit_rate(T, [0, 1, 2])
    with pytest.warns(RuntimeWarning):
        assert fit_rate(T, [0, 9, 99], smooth=True) == pytest.approx(1.0)
    with pytest.raises(InvalidParameter):
        fit_rate(T[:2], [1, 2])


def test_stride_rows():
    idx = stride_rows(10**5)
    assert len(idx) <= 2000 and idx[-1] == 10**5 - 1
    assert stride_rows(10).tolist() == list(range(10))
    assert stride_rows(4001)[-1] == 4000 and len(stride_rows(4001)) <= 2001


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(1, 300), st.integers(0, 2**31 - 1))
def test_aggregate_between_min_and_max(n_rep, T, seed):
    rng = np.random.default_rng(seed)
    traces = [RegretTrace.from_gaps(rng.uniform(0, 1, T) * (rng.uniform(size=T) < 0.5)) for _ in range(n_rep)]
    agg = aggregate(traces, max_rows=50)
    C = np.vstack([tr.cumulative for tr in traces])[:, agg["t"] - 1]
    assert np.all(C.min(0) - 1e-12 <= agg["mean_cum_regret"]) and np.all(agg["mean_cum_regret"] <= C.max(0) + 1e-12)
    assert np.allclose(agg["mean_avg_regret"], agg["mean_cum_regret"] / agg["t"])
    assert len(agg["t"]) <= 51


def test_aggregate_csv(tmp_path):
    traces = [RegretTrace.from_gaps(np.full(5000, 0.1)) for _ in range(3)]
    path = tmp_path / "agg.csv"
    write_aggregate_csv(aggregate(traces), path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "mean_cum_regret", "se_cum_regret", "mean_avg_regret", "se_avg_regret"]
    assert len(rows) - 1 <= 2000 and rows[-1][0] == "5000"
