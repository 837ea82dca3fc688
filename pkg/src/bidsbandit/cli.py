"""Command line entry point: simulate, replay, schedule, sade-fit, sweep.

Exit status is 0 on success, 1 for configuration or usage problems and 2 for
failures while running.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import BidsError, ConfigError
from .geometry import make_schedule

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

_CONFIG_FLAGS = {
    "mode": str, "theta": float, "t_init_scale": float, "n_slices": int, "d": int, "sigma": float,
    "covariates": str, "T": int, "M": int, "alpha": float, "a_scale": float, "c_B": float,
    "policy": str, "expansion": float, "hard_h": float, "workers": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _add_config_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--replicates", type=int)
    p.add_argument("--setting", help="1, 2 or hard")
    p.add_argument("--estimated-interval", action="store_true", default=None,
                   help="bound projections from the first batch instead of the true support")
    p.add_argument("--raw-widths", action="store_true", help="measure bin widths in projected units")
    for name, typ in _CONFIG_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)


def _resolve_config(args):
    from .harness import ExperimentConfig

    data = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
    for key in list(_CONFIG_FLAGS) + ["seed", "out", "replicates"]:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if args.setting is not None:
        data["setting"] = args.setting if args.setting == "hard" else _int_arg(args.setting, "setting")
    if args.estimated_interval:
        data["estimated_interval"] = True
    if args.raw_widths:
        data["normalize_widths"] = False
    return ExperimentConfig.from_dict(data)


def _int_arg(s, name):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"--{name} expects an integer or 'hard', got {s!r}") from None


def _summary(result) -> dict:
    fa = result.final_average
    return {"policy": result.config.policy, "replicates": len(fa), "mean_final_avg_regret": float(fa.mean()),
            "mean_final_cum_regret": float(result.final_regret.mean()), "out": result.config.out}


def cmd_simulate(args):
    from .harness import run_experiment

    cfg = _resolve_config(args)
    print(json.dumps(_summary(run_experiment(cfg)), indent=2))


def cmd_sweep(args):
    from .harness import run_sweep

    cfg = _resolve_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if not values:
        raise ConfigError("--values is empty")
    results = run_sweep(cfg, args.param, values)
    print(json.dumps({str(k): _summary(r) for k, r in results.items()}, indent=2))


def cmd_schedule(args):
    lo, hi = args.interval
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = make_schedule(args.T, args.M, args.alpha, (lo, hi), args.a_scale, args.c_B, args.dim)
    d = s.to_dict()
    d["warnings"] = [str(w.message) for w in caught]
    print(json.dumps(d, indent=2))


def cmd_replay(args):
    from .replay import load_csv, make_policy_factory, run_replay

    path = Path(args.data)
    if not path.is_file():
        raise ConfigError(f"dataset not found: {path}")
    ds = load_csv(path, args.label_column, args.normalize)
    factory = make_policy_factory(args.policy, args.M, t_init_scale=args.t_init_scale)
    res = run_replay(ds, factory, args.trials, args.seed, args.window)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        res.to_csv(out)
    print(json.dumps({"dataset": ds.describe(), "policy": args.policy, "trials": args.trials,
                      "final_rolling_error": float(res.mean_rolling_error[-1]),
                      "final_error_rate": float(res.mean_cum_error[-1] / ds.n), "out": args.out}, indent=2))


def cmd_sade_fit(args):
    from .replay import load_csv
    from .sir import GaussianScore, sade_estimate

    path = Path(args.data)
    if not path.is_file():
        raise ConfigError(f"dataset not found: {path}")
    ds = load_csv(path, args.response, args.normalize)
    beta, diag = sade_estimate(ds.features, ds.labels if args.categorical else _response(path, args.response),
                               GaussianScore.fit(ds.features), args.slices, return_diagnostics=True)
    print(json.dumps({"direction": beta.tolist(), **diag}, indent=2))


def _response(path, column):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return np.array([float(r[column]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"response column {column!r} is not numeric; pass --categorical") from exc


def build_parser():
    p = _Parser(prog="bidsbandit", description="Batched single-index bandit experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a synthetic experiment")
    _add_config_flags(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="repeat an experiment over one parameter")
    _add_config_flags(s)
    s.add_argument("--param", required=True, choices=["theta", "sigma", "t_init_scale", "T", "c_B"])
    s.add_argument("--values", required=True, help="comma-separated values")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("schedule", help="print the batch schedule as JSON")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--a-scale", dest="a_scale", type=float, default=1.0)
    s.add_argument("--c-B", dest="c_B", type=float, default=1.0)
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--interval", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("replay", help="replay a labeled CSV as a bandit")
    s.add_argument("--data", required=True)
    s.add_argument("--label-column", required=True)
    s.add_argument("--policy", default="bids", choices=["bids", "bids_oracle", "np_baseline"])
    s.add_argument("--M", type=int)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--window", type=int)
    s.add_argument("--t-init-scale", dest="t_init_scale", type=float, default=1.0)
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--out", help="CSV path; a JSON sidecar is written next to it")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("sade-fit", help="estimate an index direction from a CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--response", required=True)
    s.add_argument("--slices", type=int, default=10)
    s.add_argument("--categorical", action="store_true", help="treat the response as class labels")
    s.add_argument("--normalize", action="store_true")
    s.set_defaults(func=cmd_sade_fit)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BidsError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
