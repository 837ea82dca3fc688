"""Replay labeled classification data as a bandit with binary match rewards.

Row ``t`` offers context ``x_t``; playing arm ``a`` pays ``1`` when ``a`` is
the row's class and ``0`` otherwise.  Labels ``1..K`` map to arm indices
``0..K-1``.  The regret increment is ``1 - reward`` since the best arm always
pays one, so cumulative regret is the running count of mistakes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import NonparametricPolicy, box_from_pilot, np_schedule
from .errors import EmptyDataset, InvalidParameter, ParseError
from .geometry import interval_from_pilot, make_schedule  # noqa: F401  (re-exported)
from .policy import BidsPolicy, EstimateThenBids, play
from .sir import GaussianScore, sade_estimate

__all__ = ["Dataset", "load_csv", "ReplayResult", "run_replay", "default_batches", "make_policy_factory",
           "interval_from_pilot", "REPLAY_POLICIES"]

REPLAY_POLICIES = ("bids", "bids_oracle", "np_baseline")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    normalized: bool = False
    label_values: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.shape[0] == 0:
            raise EmptyDataset(f"{self.name}: no rows")
        if self.labels.size != self.features.shape[0]:
            raise InvalidParameter("one label per row required")
        if self.labels.min() < 1:
            raise InvalidParameter("labels must lie in 1..K")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def K(self) -> int:
        return int(max(self.labels.max(), len(self.label_values), 2))

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "d": self.d, "K": self.K, "normalized": self.normalized,
                "label_values": [str(v) for v in self.label_values]}


def load_csv(path, label_column: str, normalize: bool = False, name: str | None = None) -> Dataset:
    """Read a headed CSV; every column except ``label_column`` must be numeric.

    Distinct labels are sorted and numbered ``1..K``.  With ``normalize``,
    each feature is standardized with full-file statistics; constant columns
    become zeros.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file") from None
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
        fcols = [j for j in range(len(header)) if j != li]
        rows, raw_labels = [], []
        for r, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
            vals = []
            for j in fcols:
                try:
                    vals.append(float(row[j]))
                except ValueError:
                    raise ParseError(f"{path}: row {r}, column {header[j]!r}: non-numeric value {row[j]!r}") from None
            rows.append(vals)
            raw_labels.append(row[li].strip())
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    X = np.array(rows, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{path}: non-finite feature value")
    values = _sorted_labels(raw_labels)
    code = {v: i + 1 for i, v in enumerate(values)}
    y = np.array([code[v] for v in raw_labels])
    if normalize:
        sd = X.std(axis=0)
        X = np.where(sd > 0, (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    return Dataset(X, y, name or path.stem, normalize, values)


def _sorted_labels(raw):
    uniq = set(raw)
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return sorted(uniq)


def default_batches(n: int) -> int:
    """Batch count by dataset size: 5 up to 6000 rows, 6 up to 12000, else 7."""
    return 5 if n <= 6000 else 6 if n <= 12000 else 7


def make_policy_factory(kind: str, M: int | None = None, alpha: float = 1.0, a_scale: float = 1.0,
                        c_B: float = 1.0, t_init_scale: float = 1.0, n_slices: int = 10, expansion: float = 1.2):
    """Factory ``(dataset, X_permuted, rng) -> policy`` for the replay loop.

    ``bids`` estimates the index from a cyclic initial phase of
    ``round(t_init_scale * n^(2/3))`` rows; ``bids_oracle`` fits SADE on the
    whole dataset; ``np_baseline`` bins the box spanned by the first batch.
    Bin widths are measured on the unit scale.
    """
    if kind not in REPLAY_POLICIES:
        raise InvalidParameter(f"unknown replay policy {kind!r}; choose from {REPLAY_POLICIES}")

    def factory(ds: Dataset, X: np.ndarray, rng: np.random.Generator):
        n, K = ds.n, ds.K
        m = M or default_batches(n)
        if kind == "bids":
            t_init = int(round(t_init_scale * n ** (2.0 / 3.0)))

            def schedule_for(T_rest):
                return make_schedule(T_rest, m - 1, alpha, (0.0, 1.0), a_scale, c_B)

            return EstimateThenBids(n, t_init, schedule_for, K, None, n_slices, None, expansion)
        if kind == "bids_oracle":
            sched = make_schedule(n, m, alpha, (0.0, 1.0), a_scale, c_B)
            beta = sade_estimate(ds.features, ds.labels, GaussianScore.fit(ds.features), n_slices)
            iv = interval_from_pilot(X[: max(sched.grid[1], 2)] @ beta, expansion)
            return BidsPolicy(sched, iv, beta, K)
        sched = np_schedule(n, m, alpha, ds.d, a_scale, c_B)
        lo, hi = box_from_pilot(X[: max(sched.grid[1], 2)], expansion)
        return NonparametricPolicy(sched, lo, hi, K)

    factory.kind = kind
    return factory


def rolling_error(mistakes, window: int) -> np.ndarray:
    """Mistake rate over the trailing ``window`` rows (fewer at the start)."""
    c = np.concatenate([[0], np.cumsum(mistakes, dtype=float)])
    t = np.arange(1, len(mistakes) + 1)
    lo = np.maximum(t - window, 0)
    return (c[t] - c[lo]) / (t - lo)


@dataclass
class ReplayResult:
    cum_error: np.ndarray        # (trials, n)
    rolling_error: np.ndarray    # (trials, n)
    window: int
    metadata: dict

    @property
    def mean_cum_error(self) -> np.ndarray:
        return self.cum_error.mean(axis=0)

    @property
    def mean_rolling_error(self) -> np.ndarray:
        return self.rolling_error.mean(axis=0)

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "t", "cum_error", "rolling_error"])
            for k in range(self.cum_error.shape[0]):
                for t in range(self.cum_error.shape[1]):
                    w.writerow([k, t + 1, int(self.cum_error[k, t]), repr(float(self.rolling_error[k, t]))])
        path.with_suffix(".json").write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(trial),))))


def run_replay(dataset: Dataset, policy_factory, trials: int = 10, seed: int = 0,
               window: int | None = None) -> ReplayResult:
    """Permute rows per trial, stream them through a fresh policy, and count mistakes.

    ``window`` defaults to a tenth of the dataset length.
    """
    if trials < 1:
        raise InvalidParameter("need at least one trial")
    n, K = dataset.n, dataset.K
    window = max(1, n // 10) if window is None else int(window)
    cum = np.empty((trials, n), dtype=np.int64)
    roll = np.empty((trials, n))
    onehot = np.zeros((n, K))
    for k in range(trials):
        rng = trial_rng(seed, k)
        perm = rng.permutation(n)
        X = dataset.features[perm]
        labels = dataset.labels[perm]
        onehot[:] = 0.0
        onehot[np.arange(n), labels - 1] = 1.0
        policy = policy_factory(dataset, X, rng)
        arms = play(policy, X, onehot)
        wrong = arms != labels - 1
        cum[k] = np.cumsum(wrong)
        roll[k] = rolling_error(wrong, window)
    meta = {"dataset": dataset.describe(), "policy": getattr(policy_factory, "kind", repr(policy_factory)),
            "trials": trials, "seed": seed, "window": window,
            "rng": "numpy Philox4x64-10 seeded by SeedSequence(seed, spawn_key=(trial,))"}
    return ReplayResult(cum, roll, window, meta)
