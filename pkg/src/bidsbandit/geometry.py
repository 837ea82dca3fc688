"""Projected hierarchical partition and the batch / split-factor schedules.

All schedule quantities are integers derived from real-valued closed forms
(floors of powers and logarithms).  They are evaluated in high precision so
that values sitting exactly on an integer (``8 ** (2/3) == 4``) floor the
right way; real parameters are read through their shortest decimal repr.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

from .errors import (
    DegenerateInterval,
    DegenerateScheduleWarning,
    InvalidParameter,
    LeafBin,
    OutOfRange,
)

_DPS = 80
_SNAP = mpmath.mpf(10) ** -50


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(repr(float(x)))


def _mpf(x) -> mpmath.mpf:
    q = _exact(x)
    return mpmath.mpf(q.numerator) / q.denominator


def _floor(v: mpmath.mpf) -> int:
    k = mpmath.nint(v)
    if abs(v - k) < _SNAP:
        return int(k)
    return int(mpmath.floor(v))


class ProjectedInterval(NamedTuple):
    lower: float
    upper: float

    @property
    def length(self) -> float:
        return self.upper - self.lower


def as_interval(interval) -> ProjectedInterval:
    lo, hi = (float(v) for v in interval)
    if not lo < hi:
        raise InvalidParameter(f"interval needs lower < upper, got [{lo}, {hi}]")
    return ProjectedInterval(lo, hi)


class BinId(NamedTuple):
    layer: int
    index: int


def compute_split_factors(T: int, M: int, alpha: float, a_scale: float = 1.0, dim: int = 1) -> list[int]:
    """Split factors ``b_0 .. b_{M-2}``.

    With ``p = dim + 2`` and ``gamma = (1 + alpha) / p``, ``a = a_scale *
    T ** ((1 - gamma) / (1 - gamma ** M))``, ``b_0 = floor(a ** (1/p))`` and
    ``b_i = floor(b_{i-1} ** gamma)``.  Every factor is clamped to at least 1.
    """
    if T < 2 or M < 2 or not 0 < alpha <= 1 or a_scale <= 0 or dim < 1:
        raise InvalidParameter(f"need T>=2, M>=2, 0<alpha<=1, a_scale>0, dim>=1; got {T=}, {M=}, {alpha=}, {a_scale=}, {dim=}")
    with mpmath.workdps(_DPS):
        p = dim + 2
        gamma = (1 + _mpf(alpha)) / p
        expo = (1 - gamma) / (1 - gamma**M)
        a = _mpf(a_scale) * mpmath.mpf(int(T)) ** expo
        b = [max(1, _floor(mpmath.root(a, p)))]
        for _ in range(M - 2):
            b.append(max(1, _floor(mpmath.mpf(b[-1]) ** gamma)))
    return b


def layer_counts(split_factors: Sequence[int], M: int) -> list[int]:
    """Number of bins ``n_1 .. n_M`` per layer; the missing last factor is 1."""
    counts, n = [], 1
    for i in range(M):
        n *= split_factors[i] if i < len(split_factors) else 1
        counts.append(n)
    return counts


def compute_widths(interval, split_factors: Sequence[int], M: int | None = None) -> list[float]:
    """Bin widths ``w_1 .. w_M``; ``M`` defaults to ``len(split_factors) + 1``."""
    iv = as_interval(interval)
    if any(int(b) < 1 for b in split_factors):
        raise InvalidParameter("split factors must be >= 1")
    M = len(split_factors) + 1 if M is None else M
    return [iv.length / n for n in layer_counts(split_factors, M)]


def compute_grid(T: int, widths: Sequence[float], c_B: float = 1.0, dim: int = 1) -> list[int]:
    """Batch grid ``t_0 = 0 <= t_1 <= ... <= t_M = T``.

    Batch ``i < M`` gets ``floor(c_B * w_i ** -(dim+2) * log(2 T w_i))`` rounds
    (zero when the log argument is at most 1); cumulative points are clipped at
    ``T`` and the last batch takes the remainder.
    """
    if c_B <= 0:
        raise InvalidParameter("c_B must be positive")
    M = len(widths)
    grid, t, degenerate = [0], 0, False
    with mpmath.workdps(_DPS):
        cb = _mpf(c_B)
        for w in widths[: M - 1]:
            wm = _mpf(w)
            arg = 2 * int(T) * wm
            delta = 0 if arg <= 1 else max(0, _floor(cb * wm ** (-(dim + 2)) * mpmath.log(arg)))
            if delta == 0 or t + delta >= T:
                degenerate = True
            t = min(int(T), t + delta)
            grid.append(t)
    grid.append(int(T))
    if degenerate:
        warnings.warn(f"degenerate batch schedule for T={T}: grid {grid}", DegenerateScheduleWarning, stacklevel=2)
    return grid


@dataclass(frozen=True)
class Schedule:
    """Resolved split factors, widths and batch grid for one horizon."""

    T: int
    M: int
    alpha: float
    gamma: float
    a_scale: float
    c_B: float
    split_factors: tuple[int, ...]
    widths: tuple[float, ...]
    grid: tuple[int, ...]
    interval: ProjectedInterval = ProjectedInterval(0.0, 1.0)
    dim: int = 1
    counts: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(layer_counts(self.split_factors, self.M)))

    def split_factor(self, layer: int) -> int:
        """Factor splitting a layer-``layer`` bin; 1 past the computed factors."""
        return self.split_factors[layer] if layer < len(self.split_factors) else 1

    def n_bins(self, layer: int) -> int:
        return self.counts[layer - 1]

    def width(self, layer: int) -> float:
        return self.widths[layer - 1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        for k in ("split_factors", "widths", "grid", "counts"):
            d[k] = list(d[k])
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def make_schedule(
    T: int,
    M: int,
    alpha: float = 1.0,
    interval=(0.0, 1.0),
    a_scale: float = 1.0,
    c_B: float = 1.0,
    dim: int = 1,
) -> Schedule:
    iv = as_interval(interval)
    b = compute_split_factors(T, M, alpha, a_scale, dim)
    widths = compute_widths(iv, b, M)
    grid = compute_grid(T, widths, c_B, dim)
    return Schedule(
        T=int(T),
        M=int(M),
        alpha=float(alpha),
        gamma=(1 + float(alpha)) / (dim + 2),
        a_scale=float(a_scale),
        c_B=float(c_B),
        split_factors=tuple(b),
        widths=tuple(widths),
        grid=tuple(grid),
        interval=iv,
        dim=int(dim),
    )


def _fine_index(u, interval: ProjectedInterval, n_fine: int):
    k = np.floor((np.asarray(u, dtype=float) - interval.lower) / interval.length * n_fine)
    return np.clip(k, 0, n_fine - 1).astype(np.int64)


def locate(u, layer: int, schedule: Schedule, interval, clamp: bool = True):
    """Vectorized layer index of projected values ``u``.

    Indices at every layer are derived from the finest layer by integer
    division, so ``parent(locate(u, i + 1)) == locate(u, i)`` holds exactly.
    Values outside the interval are clamped to the end bins.
    """
    iv = as_interval(interval)
    u = np.asarray(u, dtype=float)
    if not clamp and np.any((u < iv.lower) | (u > iv.upper)):
        raise OutOfRange(f"value outside [{iv.lower}, {iv.upper}]")
    n_fine = schedule.counts[-1]
    return _fine_index(u, iv, n_fine) // (n_fine // schedule.n_bins(layer))


def bin_of(u: float, layer: int, schedule: Schedule, interval) -> BinId:
    """Bin at ``layer`` holding ``u``; bins are half-open except the last."""
    if not 1 <= layer <= schedule.M:
        raise InvalidParameter(f"layer {layer} outside 1..{schedule.M}")
    return BinId(layer, int(locate(u, layer, schedule, interval, clamp=False)))


def children_of(bin: BinId, schedule: Schedule) -> list[BinId]:
    if bin.layer >= schedule.M:
        raise LeafBin(f"bin {tuple(bin)} is on the last layer")
    b = schedule.split_factor(bin.layer)
    return [BinId(bin.layer + 1, bin.index * b + j) for j in range(b)]


def parent_of(bin: BinId, schedule: Schedule) -> BinId:
    if bin.layer <= 1:
        raise InvalidParameter("layer-1 bins have no parent")
    return BinId(bin.layer - 1, bin.index // schedule.split_factor(bin.layer - 1))


def bin_extent(bin: BinId, schedule: Schedule, interval) -> ProjectedInterval:
    iv = as_interval(interval)
    n = schedule.n_bins(bin.layer)
    lo = iv.lower + iv.length * bin.index / n
    hi = iv.upper if bin.index == n - 1 else iv.lower + iv.length * (bin.index + 1) / n
    return ProjectedInterval(lo, hi)


def interval_from_pilot(projections, expansion: float = 1.2) -> ProjectedInterval:
    """Observed range of ``projections`` widened about its midpoint by ``expansion``."""
    u = np.asarray(projections, dtype=float).ravel()
    if u.size < 2:
        raise InvalidParameter("need at least two projections")
    if expansion < 1:
        raise InvalidParameter("expansion must be >= 1")
    a, b = float(u.min()), float(u.max())
    if a == b:
        raise DegenerateInterval(f"all projections equal {a}")
    mid, half = (a + b) / 2, expansion * (b - a) / 2
    return ProjectedInterval(mid - half, mid + half)
