"""Nonparametric comparison policy over hypercube bins of the full covariate space.

This approximates batched successive elimination with dynamic binning by
reusing the single-index schedule formulas with the exponent ``3`` replaced
by ``d + 2``.  It is not a reimplementation of any published constant set.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidParameter, LeafBin
from .geometry import Schedule, interval_from_pilot, make_schedule
from .policy import EliminationPolicy

APPROXIMATION_NOTE = "exponent d+2 substituted into the single-index schedule; not the published baseline constants"


class HyperBinId(NamedTuple):
    layer: int
    multi_index: tuple[int, ...]


def np_schedule(T: int, M: int, alpha: float, d: int, a_scale: float = 1.0, c_B: float = 1.0,
                interval=(0.0, 1.0)) -> Schedule:
    """Schedule with ``gamma = (1 + alpha) / (d + 2)`` and widths ``w ** -(d + 2)``."""
    return make_schedule(T, M, alpha, interval, a_scale, c_B, dim=d)


class HypercubePartition:
    """Equal hypercubes over a box; layer ``i`` has ``n_i`` cells per axis."""

    def __init__(self, schedule: Schedule, lower, upper, d: int):
        self.schedule = schedule
        self.dim = int(d)
        self.lower = np.broadcast_to(np.asarray(lower, dtype=float), (d,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, dtype=float), (d,)).copy()
        if np.any(self.lower >= self.upper):
            raise InvalidParameter("empty box")
        self.length = self.upper - self.lower
        if schedule.counts[-1] ** d > 50_000_000:
            raise InvalidParameter(f"{schedule.counts[-1]}^{d} cells is too many to index")

    def per_axis(self, layer: int) -> int:
        return self.schedule.n_bins(layer)

    def n_cells(self, layer: int) -> int:
        return self.per_axis(layer) ** self.dim

    def fine_index(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_fine = self.schedule.counts[-1]
        k = np.floor((X - self.lower) / self.length * n_fine)
        return np.clip(k, 0, n_fine - 1).astype(np.int64)

    def coarsen(self, fine, layer: int) -> np.ndarray:
        n = self.per_axis(layer)
        k = fine // (self.schedule.counts[-1] // n)
        return np.ravel_multi_index(tuple(k.T), (n,) * self.dim)

    def children(self, layer: int, index: int) -> list[int]:
        if layer >= self.schedule.M:
            raise LeafBin(f"layer {layer} is the last layer")
        n, b = self.per_axis(layer), self.schedule.split_factor(layer)
        base = np.array(np.unravel_index(index, (n,) * self.dim))
        offsets = np.stack(np.meshgrid(*[np.arange(b)] * self.dim, indexing="ij"), -1).reshape(-1, self.dim)
        kids = base * b + offsets
        return np.ravel_multi_index(tuple(kids.T), (n * b,) * self.dim).tolist()

    def label(self, index: int, layer: int):
        n = self.per_axis(layer)
        return [int(i) for i in np.unravel_index(index, (n,) * self.dim)]

    def hyper_bin(self, index: int, layer: int) -> HyperBinId:
        return HyperBinId(layer, tuple(self.label(index, layer)))

    def width(self, layer: int) -> float:
        return self.schedule.width(layer)


class NonparametricPolicy(EliminationPolicy):
    """Successive elimination on hypercubes; children number ``b_i ** d``."""

    name = "np_baseline"

    def __init__(self, schedule: Schedule, lower, upper, n_arms: int = 2, horizon: int | None = None):
        d = schedule.dim
        super().__init__(HypercubePartition(schedule, lower, upper, d), schedule, n_arms, horizon)


def box_from_pilot(X, expansion: float = 1.2):
    """Per-axis intervals from a pilot sample, each widened by ``expansion``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ivs = [interval_from_pilot(X[:, j], expansion) for j in range(X.shape[1])]
    return np.array([iv.lower for iv in ivs]), np.array([iv.upper for iv in ivs])
