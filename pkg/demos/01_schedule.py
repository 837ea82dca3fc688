"""
Batch schedules and the projected bin tree
==========================================

A schedule fixes, before any data arrive, how many rounds each batch gets
and how finely the projected axis is cut in each layer.
"""
import numpy as np

from bidsbandit.geometry import BinId, bin_extent, children_of, locate, make_schedule
from bidsbandit.policy import threshold_U

s = make_schedule(10**6, 5, alpha=1.0)
print("split factors", s.split_factors)  # (5, 2, 1, 1)
print("bins per layer", s.counts)
print("grid", s.grid)

# a bin in layer 1 and its children in layer 2
print(children_of(BinId(1, 3), s))
print(bin_extent(BinId(2, 7), s, (0.0, 1.0)))

# where some projected values land, layer by layer
u = np.array([0.05, 0.5, 0.97])
for layer in range(1, s.M + 1):
    print(layer, locate(u, layer, s, (0.0, 1.0)))

# the elimination threshold shrinks as a bin collects visits
for m in (10, 100, 1000, 10000):
    print(m, round(threshold_U(m, s.T, s.width(1)), 3))

# JSON form, as printed by `bidsbandit schedule`
print(s.to_json())
