"""Batched successive elimination with dynamic binning.

The engine is shared by the single-index policy (bins are slabs of the
projection ``x @ beta``) and the nonparametric baseline (bins are hypercubes);
only the partition object differs.  Arms are 0-indexed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, NotAtBoundary
from .geometry import BinId, Schedule, _fine_index, as_interval, children_of, interval_from_pilot
from .sir import GaussianScore, cyclic_arms, estimate_from_arms, normalize_direction


def threshold_U(m: int, T: int, bin_width: float) -> float:
    """Elimination radius ``4 * sqrt(2 * log(2 T w) / m)``; ``inf`` if undefined."""
    arg = 2.0 * T * bin_width
    if m <= 0 or arg <= 1.0:
        return math.inf
    return 4.0 * math.sqrt(2.0 * math.log(arg) / m)


class ProjectedPartition:
    """Equal-width slabs of ``x @ direction`` over a projected interval."""

    def __init__(self, schedule: Schedule, interval, direction):
        self.schedule = schedule
        self.interval = as_interval(interval)
        self.direction = normalize_direction(direction)
        self.dim = self.direction.size

    def n_cells(self, layer: int) -> int:
        return self.schedule.n_bins(layer)

    def fine_index(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _fine_index(X @ self.direction, self.interval, self.schedule.counts[-1])

    def coarsen(self, fine, layer: int) -> np.ndarray:
        return fine // (self.schedule.counts[-1] // self.n_cells(layer))

    def children(self, layer: int, index: int) -> list[int]:
        return [c.index for c in children_of(BinId(layer, index), self.schedule)]

    def label(self, index: int, layer: int):
        return int(index)

    def width(self, layer: int) -> float:
        return self.schedule.width(layer)


@dataclass
class BinState:
    layer: int
    index: int
    active: list[int]
    n_arms: int
    born: int
    frozen: bool = False
    retired: bool = False
    m: int = 0
    counts: np.ndarray = field(default=None, repr=False)
    sums: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.n_arms, dtype=np.int64)
        if self.sums is None:
            self.sums = np.zeros(self.n_arms)

    @property
    def bin(self) -> BinId:
        return BinId(self.layer, self.index)

    def means(self) -> dict[int, float]:
        return {k: self.sums[k] / self.counts[k] for k in self.active if self.counts[k] > 0}


class EliminationPolicy:
    """Successive arm elimination over a refining partition.

    During batch ``i`` every point falls in exactly one live bin (born at the
    start of batch ``i``) or one frozen bin.  Live bins pull their active
    arms round-robin in visit order; frozen bins always play their survivor.
    At the end of batch ``i < M`` each live bin runs one elimination test and
    is then either frozen (one survivor) or replaced by its children.
    """

    name = "elimination"

    def __init__(self, partition, schedule: Schedule, n_arms: int = 2, horizon: int | None = None):
        if n_arms < 2:
            raise InvalidParameter("need at least two arms")
        self.partition = partition
        self.schedule = schedule
        self.n_arms = int(n_arms)
        self.horizon = int(schedule.T if horizon is None else horizon)
        self.grid = tuple(schedule.grid)
        self.t = 0
        self.batch = 0  # 0-based index of the running batch
        self.bins: list[BinState] = []
        self._slots: dict[int, np.ndarray] = {}
        self.reports: list[dict] = []
        for idx in range(partition.n_cells(1)):
            self._add_bin(1, idx, list(range(self.n_arms)))

    # -- bookkeeping -----------------------------------------------------
    def _slot(self, layer: int) -> np.ndarray:
        if layer not in self._slots:
            self._slots[layer] = np.full(self.partition.n_cells(layer), -1, dtype=np.int64)
        return self._slots[layer]

    def _add_bin(self, layer: int, index: int, active: list[int]) -> None:
        self._slot(layer)[index] = len(self.bins)
        self.bins.append(BinState(layer, index, list(active), self.n_arms, born=self.batch + 1))

    def locate(self, X) -> np.ndarray:
        """Position in ``self.bins`` of the live or frozen bin covering each row."""
        fine = self.partition.fine_index(X)
        out = np.full(fine.shape[0], -1, dtype=np.int64)
        for layer in sorted(self._slots):
            hit = self._slots[layer][self.partition.coarsen(fine, layer)]
            out = np.where(out < 0, hit, out)
        return out

    def covering_bin(self, x) -> BinState:
        return self.bins[int(self.locate(x)[0])]

    @property
    def live_bins(self) -> list[BinState]:
        return [b for b in self.bins if not (b.frozen or b.retired)]

    @property
    def frozen_bins(self) -> list[BinState]:
        return [b for b in self.bins if b.frozen]

    def next_boundary(self) -> int:
        return self.grid[self.batch + 1]

    @property
    def n_batches(self) -> int:
        return len(self.grid) - 1

    # -- per-round interface --------------------------------------------
    def choose_arm(self, x) -> int:
        b = self.covering_bin(x)
        if b.frozen:
            return b.active[0]
        return b.active[b.m % len(b.active)]

    def record_reward(self, x, arm: int, y: float) -> None:
        b = self.covering_bin(x)
        b.m += 1
        b.counts[arm] += 1
        b.sums[arm] += y
        self.t += 1

    # -- batched interface ----------------------------------------------
    def choose_batch(self, X) -> np.ndarray:
        """Arms for consecutive rows, identical to repeated ``choose_arm`` +
        ``record_reward`` calls in row order."""
        ids = self.locate(X)
        n = ids.size
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        nb = len(self.bins)
        table = np.zeros((nb, self.n_arms), dtype=np.int64)
        n_active = np.empty(nb, dtype=np.int64)
        start = np.empty(nb, dtype=np.int64)
        for j, b in enumerate(self.bins):
            table[j, : len(b.active)] = b.active
            n_active[j] = 1 if b.frozen else len(b.active)
            start[j] = 0 if b.frozen else b.m
        order = np.argsort(ids, kind="stable")
        sorted_ids = ids[order]
        first = np.r_[0, np.flatnonzero(np.diff(sorted_ids)) + 1]
        group_start = np.repeat(first, np.diff(np.r_[first, n]))
        ordinal = np.empty(n, dtype=np.int64)
        ordinal[order] = np.arange(n) - group_start
        slot = (start[ids] + ordinal) % n_active[ids]
        return table[ids, slot]

    def record_batch(self, X, arms, y) -> None:
        ids = self.locate(X)
        arms = np.asarray(arms, dtype=np.int64)
        y = np.asarray(y, dtype=float)
        nb = len(self.bins)
        m = np.bincount(ids, minlength=nb)
        flat = ids * self.n_arms + arms
        cnt = np.bincount(flat, minlength=nb * self.n_arms).reshape(nb, self.n_arms)
        tot = np.bincount(flat, weights=y, minlength=nb * self.n_arms).reshape(nb, self.n_arms)
        for j in np.flatnonzero(m):
            b = self.bins[j]
            b.m += int(m[j])
            b.counts += cnt[j]
            b.sums += tot[j]
        self.t += ids.size

    # -- elimination -----------------------------------------------------
    def end_batch(self) -> list[dict]:
        """Run the elimination test on every bin born in the finishing batch."""
        if self.batch >= self.n_batches - 1 or self.t != self.grid[self.batch + 1]:
            raise NotAtBoundary(f"round {self.t} is not an interior grid point of {self.grid}")
        report = []
        finishing = [b for b in self.live_bins if b.born == self.batch + 1]
        self.batch += 1
        for b in finishing:
            means = b.means()
            eliminated = []
            if len(b.active) > 1 and means:
                best = max(means.values())
                radius = threshold_U(b.m, self.horizon, self.partition.width(b.layer))
                eliminated = [k for k, v in means.items() if best - v > radius]
            survivors = [k for k in b.active if k not in eliminated]
            b.active = survivors
            split = len(survivors) > 1
            if split:
                b.retired = True
                self._slots[b.layer][b.index] = -1
                for child in self.partition.children(b.layer, b.index):
                    self._add_bin(b.layer + 1, child, survivors)
            else:
                b.frozen = True
            report.append(
                {
                    "batch": self.batch,
                    "bin_layer": b.layer,
                    "bin_index": self.partition.label(b.index, b.layer),
                    "eliminated_arms": [int(k) for k in eliminated],
                    "survivors": [int(k) for k in survivors],
                    "split": split,
                }
            )
        self.reports.extend(report)
        return report

    def report_lines(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.reports)


class BidsPolicy(EliminationPolicy):
    """Single-index policy: elimination over slabs of ``x @ direction``."""

    name = "bids"

    def __init__(self, schedule: Schedule, interval, direction, n_arms: int = 2, horizon: int | None = None):
        super().__init__(ProjectedPartition(schedule, interval, direction), schedule, n_arms, horizon)

    @property
    def direction(self) -> np.ndarray:
        return self.partition.direction

    @property
    def interval(self):
        return self.partition.interval


class EstimateThenBids:
    """Cyclic initial phase, index estimation, then the single-index policy.

    The first ``t_init`` rounds pull arms round-robin.  At their end each arm's
    observations go through SADE, the estimates are fused with equal weights,
    and a :class:`BidsPolicy` with ``M - 1`` batches runs on the remaining
    ``T - t_init`` rounds.  ``make_schedule`` maps the remaining horizon to a
    schedule; ``interval`` is either fixed or ``None`` to widen the observed
    range of projections by ``expansion``.
    """

    name = "bids_estimate"

    def __init__(self, T: int, t_init: int, make_schedule, n_arms: int = 2, interval=None,
                 n_slices: int = 10, score=None, expansion: float = 1.2):
        if not 0 < t_init < T:
            raise InvalidParameter(f"t_init must lie in (0, T); got {t_init}")
        self.T = int(T)
        self.t_init = int(t_init)
        self.n_arms = int(n_arms)
        self._make_schedule = make_schedule
        self._interval = interval
        self.n_slices = n_slices
        self.score = score
        self.expansion = expansion
        self.t = 0
        self.inner: BidsPolicy | None = None
        self.direction = None
        self._X, self._arms, self._y = [], [], []

    @property
    def grid(self) -> tuple[int, ...]:
        if self.inner is None:
            return (0, self.t_init)
        return (0, self.t_init) + tuple(self.t_init + g for g in self.inner.grid[1:])

    @property
    def reports(self) -> list[dict]:
        return [] if self.inner is None else [{**r, "batch": r["batch"] + 1} for r in self.inner.reports]

    def next_boundary(self) -> int:
        if self.inner is None:
            return self.t_init
        return self.t_init + self.inner.next_boundary()

    def choose_arm(self, x) -> int:
        if self.inner is None:
            return int(self.t % self.n_arms)
        return self.inner.choose_arm(x)

    def record_reward(self, x, arm: int, y: float) -> None:
        self.record_batch(np.atleast_2d(x), [arm], [y])

    def choose_batch(self, X) -> np.ndarray:
        if self.inner is None:
            return cyclic_arms(len(X), self.n_arms, self.t)
        return self.inner.choose_batch(X)

    def record_batch(self, X, arms, y) -> None:
        if self.inner is None:
            self._X.append(np.atleast_2d(np.asarray(X, dtype=float)))
            self._arms.append(np.asarray(arms))
            self._y.append(np.asarray(y, dtype=float))
        else:
            self.inner.record_batch(X, arms, y)
        self.t += len(arms)

    def end_batch(self) -> list[dict]:
        if self.inner is not None:
            return self.inner.end_batch()
        if self.t != self.t_init:
            raise NotAtBoundary(f"initial phase ends at {self.t_init}, now at {self.t}")
        X = np.concatenate(self._X)
        arms = np.concatenate(self._arms)
        y = np.concatenate(self._y)
        score = GaussianScore.fit(X) if self.score is None else self.score
        self.direction = estimate_from_arms(X, arms, y, self.n_arms, score, self.n_slices)
        interval = self._interval
        if interval is None:
            interval = interval_from_pilot(X @ self.direction, self.expansion)
        self.inner = BidsPolicy(self._make_schedule(self.T - self.t_init), interval, self.direction,
                                self.n_arms)
        self._X, self._arms, self._y = [], [], []
        return [{"batch": 1, "direction": self.direction.tolist(), "interval": list(interval)}]


def play(policy, X, means, noise=None, observe=None):
    """Run ``policy`` over pre-drawn covariates; return the arms played.

    ``means`` is the ``(T, K)`` matrix of mean rewards and ``noise`` the
    per-round additive noise; ``observe`` may post-process rewards (clipping).
    """
    T = len(X)
    arms = np.empty(T, dtype=np.int64)
    rows = np.arange(T)
    t = 0
    while t < T:
        end = T if policy.next_boundary() >= T else policy.next_boundary()
        sl = slice(t, end)
        a = policy.choose_batch(X[sl])
        y = means[rows[sl], a]
        if noise is not None:
            y = y + noise[sl]
        if observe is not None:
            y = observe(y)
        policy.record_batch(X[sl], a, y)
        arms[sl] = a
        t = end
        if t < T:
            policy.end_batch()
    return arms
