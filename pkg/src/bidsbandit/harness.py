"""Experiment configuration, seeded replicate fan-out and output writing.

Replicate ``r`` draws everything from ``SeedSequence(seed, spawn_key=(r,))``
through numpy's counter-based Philox generator.  Each replicate's stream is
split by purpose (environment, covariates, noise, policy), so two configs
differing only in policy or perturbation see identical environments and data.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import APPROXIMATION_NOTE, NonparametricPolicy, box_from_pilot, np_schedule
from .envs import Environment, make_hard_env, make_setting
from .errors import BidsError, ConfigError
from .geometry import interval_from_pilot, make_schedule
from .metrics import RegretTrace, aggregate, write_aggregate_csv
from .policy import BidsPolicy, EstimateThenBids, play
from .sir import perturb_direction

RNG_ALGORITHM = "numpy Philox4x64-10 seeded by SeedSequence(seed, spawn_key=(replicate,))"
_STREAMS = ("environment", "covariates", "noise", "policy")

POLICIES = ("bids", "bids_oracle", "np_baseline")
MODES = ("pilot", "estimate")
THETA_ROUNDING = 5e-4


@dataclass
class ExperimentConfig:
    mode: str = "pilot"
    theta: float = 0.0
    t_init_scale: float = 1.0
    n_slices: int = 10
    setting: int | str = 1
    d: int = 5
    sigma: float = 0.1
    covariates: str = "truncated_normal"
    T: int = 100_000
    M: int = 5
    alpha: float = 1.0
    a_scale: float = 1.0
    c_B: float = 1.0
    K: int = 2
    replicates: int = 20
    seed: int = 0
    policy: str = "bids"
    out: str | None = None
    normalize_widths: bool = True
    estimated_interval: bool = False
    expansion: float = 1.2
    hard_h: float = 0.1
    workers: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if math.pi / 2 < self.theta <= math.pi / 2 + THETA_ROUNDING:
            # accept pi/2 typed to three decimals
            self.theta = math.pi / 2
        if not 0 <= self.theta <= math.pi / 2:
            raise ConfigError("theta must lie in [0, pi/2]")
        if self.T < 2 or self.M < 2 or self.replicates < 1 or self.d < 1:
            raise ConfigError("need T >= 2, M >= 2, d >= 1 and at least one replicate")
        if self.mode == "estimate" and self.policy == "bids" and self.M < 3:
            raise ConfigError("estimate mode needs M >= 3 (one batch for the initial phase)")
        if self.setting not in (1, 2, "hard"):
            raise ConfigError(f"setting must be 1, 2 or 'hard', got {self.setting!r}")
        if self.K != 2:
            raise ConfigError("the synthetic settings have exactly two arms")
        if not 0 < self.alpha <= 1 or self.c_B <= 0 or self.a_scale <= 0 or self.sigma < 0:
            raise ConfigError("need 0 < alpha <= 1, c_B > 0, a_scale > 0, sigma >= 0")

    @property
    def t_init(self) -> int:
        return int(round(self.t_init_scale * self.T ** (2.0 / 3.0)))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def replicate_rngs(seed: int, replicate: int) -> dict[str, np.random.Generator]:
    """Independent generators per purpose; a pure function of ``(seed, replicate)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(_STREAMS, ss.spawn(len(_STREAMS)))}


def build_environment(cfg: ExperimentConfig, rng: np.random.Generator) -> Environment:
    if cfg.setting == "hard":
        return make_hard_env(cfg.hard_h, cfg.alpha, cfg.d, cfg.sigma, rng)
    return make_setting(int(cfg.setting), cfg.d, cfg.sigma, rng, covariates=cfg.covariates)


def _unit_or(interval, cfg: ExperimentConfig):
    return (0.0, 1.0) if cfg.normalize_widths else interval


def build_policy(cfg: ExperimentConfig, env: Environment, X: np.ndarray, rng: np.random.Generator):
    """Policy for one replicate plus the schedule(s) it resolved."""
    T, M = cfg.T, cfg.M
    if cfg.estimated_interval and not cfg.normalize_widths:
        raise ConfigError("estimated_interval needs normalize_widths (the grid must not depend on data)")

    if cfg.policy == "np_baseline":
        sched = np_schedule(T, M, cfg.alpha, env.dim, cfg.a_scale, cfg.c_B)
        box = env.covariates.support_box
        if cfg.estimated_interval or box is None:
            box = box_from_pilot(X[: max(sched.grid[1], 2)], cfg.expansion)
        if not cfg.normalize_widths:
            lo, hi = np.broadcast_to(np.asarray(box[0], float), env.dim), np.broadcast_to(np.asarray(box[1], float), env.dim)
            sched = np_schedule(T, M, cfg.alpha, env.dim, cfg.a_scale, cfg.c_B, (float(lo[0]), float(hi[0])))
        return NonparametricPolicy(sched, box[0], box[1], cfg.K), {"schedule": sched.to_dict(), "box": [np.asarray(b).tolist() for b in box]}

    if cfg.mode == "estimate" and cfg.policy == "bids":
        interval = None if cfg.estimated_interval else env.domain

        def schedule_for(T_rest, interval=interval):
            return make_schedule(T_rest, M - 1, cfg.alpha, _unit_or(interval, cfg), cfg.a_scale, cfg.c_B)

        pol = EstimateThenBids(T, cfg.t_init, schedule_for, cfg.K, interval, cfg.n_slices, env.score(), cfg.expansion)
        return pol, {"t_init": cfg.t_init, "schedule": schedule_for(T - cfg.t_init).to_dict()}

    if cfg.policy == "bids_oracle":
        direction = env.beta
    elif cfg.mode == "pilot":
        direction = perturb_direction(env.beta, cfg.theta, rng)
    else:
        raise ConfigError("estimate mode applies to policy 'bids'")
    sched = make_schedule(T, M, cfg.alpha, _unit_or(env.domain, cfg), cfg.a_scale, cfg.c_B)
    interval = env.domain
    if cfg.estimated_interval:
        interval = interval_from_pilot(X[: max(sched.grid[1], 2)] @ direction, cfg.expansion)
    return BidsPolicy(sched, interval, direction, cfg.K), {"schedule": sched.to_dict(), "direction": direction.tolist(),
                                                         "interval": list(interval)}


def run_replicate(cfg: ExperimentConfig, replicate: int):
    rngs = replicate_rngs(cfg.seed, replicate)
    env = build_environment(cfg, rngs["environment"])
    X = env.sample_covariates(cfg.T, rngs["covariates"])
    noise = env.noise(cfg.T, rngs["noise"])
    G = env.mean_rewards(X)
    policy, info = build_policy(cfg, env, X, rngs["policy"])
    observe = (lambda y: np.clip(y, *env.clip)) if env.clip is not None else None
    arms = play(policy, X, G, noise, observe)
    gaps = G.max(axis=1) - G[np.arange(cfg.T), arms]
    meta = {"replicate": replicate, "policy": cfg.policy, "environment": env.describe(), **info}
    if isinstance(policy, EstimateThenBids) and policy.direction is not None:
        meta["estimated_direction"] = policy.direction.tolist()
    return RegretTrace.from_gaps(gaps, meta), policy.reports


def _run_one(args):
    cfg, r = args
    try:
        return run_replicate(cfg, r)
    except BidsError as exc:
        raise RuntimeError(f"replicate {r} (seed {cfg.seed}) failed: {exc}") from exc


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RegretTrace]
    reports: list[list[dict]]
    aggregate: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def final_average(self) -> np.ndarray:
        return np.array([tr.final_average for tr in self.traces])

    @property
    def final_regret(self) -> np.ndarray:
        return np.array([tr.final for tr in self.traces])


def _pool_size(cfg: ExperimentConfig) -> int:
    cap = os.environ.get("BIDS_THREADS")
    n = cfg.workers or (int(cap) if cap else os.cpu_count() or 1)
    if cap:
        n = min(n, int(cap))
    return max(1, min(n, cfg.replicates))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every replicate, aggregate, and write outputs when ``cfg.out`` is set."""
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    workers = _pool_size(cfg)
    if workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_one, jobs))
    traces = [tr for tr, _ in results]
    reports = [rep for _, rep in results]
    meta = {
        "config": cfg.to_dict(),
        "package_version": __version__,
        "rng": RNG_ALGORITHM,
        "replicates": [tr.metadata for tr in traces],
    }
    if cfg.policy == "np_baseline":
        meta["approximation"] = APPROXIMATION_NOTE
    result = ExperimentResult(cfg, traces, reports, aggregate(traces), meta)
    if cfg.out:
        write_outputs(result, cfg.out)
    return result


def write_outputs(result: ExperimentResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for r, tr in enumerate(result.traces):
        tr.to_csv(out / f"replicate_{r:03d}.csv")
    write_aggregate_csv(result.aggregate, out / "aggregate.csv")
    with open(out / "eliminations.jsonl", "w") as fh:
        for r, rep in enumerate(result.reports):
            for line in rep:
                fh.write(json.dumps({"replicate": r, "policy": result.config.policy, **line}) + "\n")
    (out / "metadata.json").write_text(json.dumps(result.metadata, indent=2, sort_keys=True) + "\n")


SWEEPABLE = ("theta", "sigma", "t_init_scale", "T", "c_B")


def run_sweep(cfg: ExperimentConfig, param: str, values) -> dict:
    """One experiment per value, written under ``cfg.out/<param>=<value>``."""
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    results = {}
    for v in values:
        v = int(v) if param == "T" else float(v)
        out = None if cfg.out is None else str(Path(cfg.out) / f"{param}={v}")
        results[v] = run_experiment(cfg.replace(**{param: v, "out": out}))
    return results
