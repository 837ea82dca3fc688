"""
Against the nonparametric baseline
==================================

The baseline bins the whole covariate box; each split multiplies the cell
count by b^d, so in d = 5 it stays coarse for much longer.
"""
import numpy as np

from bidsbandit.baseline import np_schedule
from bidsbandit.geometry import make_schedule
from bidsbandit.harness import ExperimentConfig, run_experiment

T, M = 100_000, 5
print("single-index widths ", np.round(make_schedule(T, M, 1.0).widths, 4))
print("d=5 hypercube widths", np.round(np_schedule(T, M, 1.0, 5).widths, 4))

cfg = ExperimentConfig(setting=2, T=30_000, replicates=4, workers=1)
ours = run_experiment(cfg.replace(policy="bids_oracle")).final_average
base = run_experiment(cfg.replace(policy="np_baseline")).final_average
for r, (a, b) in enumerate(zip(ours, base)):
    print(f"replicate {r}: bids {a:.4f}  baseline {b:.4f}")
