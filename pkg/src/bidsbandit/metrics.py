"""Regret traces, aggregation across replicates, and log-log rate fits."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, NonPositiveRegret

MAX_AGGREGATE_ROWS = 2000


@dataclass
class RegretTrace:
    """Cumulative regret and inferior-pull count after each round."""

    cumulative: np.ndarray = field(default_factory=lambda: np.zeros(0))
    inferior: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_gaps(cls, gaps, metadata: dict | None = None) -> "RegretTrace":
        gaps = np.asarray(gaps, dtype=float)
        if np.any(gaps < 0):
            raise InvalidParameter("regret increments must be nonnegative")
        return cls(np.cumsum(gaps), np.cumsum(gaps > 0, dtype=np.int64), dict(metadata or {}))

    def accumulate(self, gap: float) -> None:
        """Append one round with oracle gap ``gap``."""
        if gap < 0:
            raise InvalidParameter("regret increments must be nonnegative")
        last_c = self.cumulative[-1] if self.cumulative.size else 0.0
        last_i = self.inferior[-1] if self.inferior.size else 0
        self.cumulative = np.append(self.cumulative, last_c + gap)
        self.inferior = np.append(self.inferior, last_i + int(gap > 0))

    def extend(self, gaps) -> None:
        other = RegretTrace.from_gaps(gaps)
        off_c = self.cumulative[-1] if self.cumulative.size else 0.0
        off_i = self.inferior[-1] if self.inferior.size else 0
        self.cumulative = np.concatenate([self.cumulative, other.cumulative + off_c])
        self.inferior = np.concatenate([self.inferior, other.inferior + off_i])

    def __len__(self) -> int:
        return self.cumulative.size

    @property
    def average(self) -> np.ndarray:
        return self.cumulative / np.arange(1, len(self) + 1)

    @property
    def final(self) -> float:
        return float(self.cumulative[-1])

    @property
    def final_average(self) -> float:
        return self.final / len(self)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "cum_regret", "avg_regret", "inferior_count"])
            avg = self.average
            for t in range(len(self)):
                w.writerow([t + 1, repr(float(self.cumulative[t])), repr(float(avg[t])), int(self.inferior[t])])


def stride_rows(T: int, max_rows: int = MAX_AGGREGATE_ROWS) -> np.ndarray:
    """Row positions kept when thinning a length-``T`` series; always keeps the last."""
    step = max(1, -(-T // max_rows))
    idx = np.arange(step - 1, T, step)
    if idx.size == 0 or idx[-1] != T - 1:
        idx = np.append(idx, T - 1)
    return idx


def aggregate(traces, max_rows: int = MAX_AGGREGATE_ROWS) -> dict[str, np.ndarray]:
    """Pointwise mean and standard error of cumulative and average regret."""
    C = np.vstack([tr.cumulative for tr in traces])
    T = C.shape[1]
    idx = stride_rows(T, max_rows)
    t = idx + 1
    n = C.shape[0]
    se = C.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(T)
    mean = C.mean(axis=0)
    return {"t": t, "mean_cum_regret": mean[idx], "se_cum_regret": se[idx],
            "mean_avg_regret": mean[idx] / t, "se_avg_regret": se[idx] / t}


def write_aggregate_csv(agg: dict, path) -> None:
    cols = list(agg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(agg[c] for c in cols)):
            w.writerow([int(v) if c == "t" else repr(float(v)) for c, v in zip(cols, row)])


def fit_rate(horizons, regrets, smooth: bool = False) -> float:
    """Least-squares slope of ``log R`` against ``log T``.

    Nonpositive regrets raise unless ``smooth`` is set, in which case every
    regret is shifted by one before taking logs.
    """
    T = np.asarray(horizons, dtype=float)
    R = np.asarray(regrets, dtype=float)
    if T.size < 3 or T.size != R.size:
        raise InvalidParameter("need at least three (T, R) points")
    if np.any(T <= 0):
        raise InvalidParameter("horizons must be positive")
    if np.any(R <= 0):
        if not smooth:
            raise NonPositiveRegret("regret must be positive for a log-log fit")
        warnings.warn("nonpositive regret: fitting log(R + 1)", RuntimeWarning, stacklevel=2)
        R = R + 1.0
    slope, _ = np.polyfit(np.log(T), np.log(R), 1)
    return float(slope)
