"""
Simulating the two-armed settings
=================================

Setting 1 pairs a bump link with the line 1/2 + u; setting 2 pairs two
bump links.  Covariates are truncated normal in [-3, 3]^d.
"""
import numpy as np

from bidsbandit.envs import make_setting
from bidsbandit.harness import ExperimentConfig, run_experiment

env = make_setting(1, d=5, sigma=0.1, rng=np.random.default_rng(0))
print(env.describe()["links"][0])

u = np.linspace(*env.domain, 7)
X = np.outer(u, env.beta)
print(np.round(env.mean_rewards(X), 3))

# small run: the pilot direction is off by theta
cfg = ExperimentConfig(setting=1, T=20_000, replicates=4, workers=1)
for theta in (0.0, np.pi / 3, np.pi / 2):
    res = run_experiment(cfg.replace(theta=theta))
    print(f"theta={theta:.2f}  mean final average regret {res.final_average.mean():.4f}")

# the initial-phase variant estimates the direction first
res = run_experiment(cfg.replace(mode="estimate"))
print("estimate mode", round(res.final_average.mean(), 4))
print(res.traces[0].metadata["estimated_direction"])
