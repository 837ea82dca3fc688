"""
Replaying a classification dataset
==================================

Each row becomes a round; the arm is a guessed class and the reward is one
for a correct guess.  Cumulative regret is the number of mistakes.
"""
import numpy as np

from bidsbandit.replay import Dataset, make_policy_factory, run_replay

rng = np.random.default_rng(0)
beta = rng.standard_normal(5)
X = rng.standard_normal((5000, 5))
ds = Dataset(X, np.where(X @ beta > 0, 2, 1), "separable")
print(ds.describe())

for kind in ("bids", "np_baseline"):
    res = run_replay(ds, make_policy_factory(kind), trials=5, seed=0)
    print(f"{kind:12s} final rolling error {res.mean_rolling_error[-1]:.3f}  "
          f"mistakes {res.mean_cum_error[-1]:.0f}")

# res.to_csv("replay.csv") writes trial, t, cum_error, rolling_error plus a JSON sidecar
