"""
Regret curves and empirical rates
=================================

Traces keep cumulative regret per round; a log-log least-squares fit of
final regret against horizon gives an empirical exponent.
"""
import numpy as np

from bidsbandit.harness import ExperimentConfig, run_experiment
from bidsbandit.metrics import fit_rate

gamma = 2 / 3
print("target exponent", (1 - gamma) / (1 - gamma**5))  # 81/211

cfg = ExperimentConfig(setting=1, policy="bids_oracle", replicates=4, workers=1)
Ts = [5_000, 10_000, 20_000, 40_000]
R = [run_experiment(cfg.replace(T=T)).final_regret.mean() for T in Ts]
print("mean final regret", np.round(R, 1))
print("fitted slope", round(fit_rate(Ts, R), 3))

# short horizons sit before the asymptotic regime, so the slope can differ a lot
res = run_experiment(cfg.replace(T=10_000))
agg = res.aggregate
print(agg["t"][-3:], np.round(agg["mean_avg_regret"][-3:], 4))
