"""Command-line interface.

    incagg mmdagginc X.csv Y.csv [--R 200 | --full | --random-L L] ...
    incagg hsicagginc X.csv Y.csv ...
    incagg ksdagginc X.csv --model gbrbm --model-params model.json ...
    incagg experiment --problem mmd --sweep sample_size --values 200 400 ...
    incagg sample --problem ksd --N 500 --out-x X.csv --out-model model.json

Exit codes: 0 success, 2 malformed input, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .estimator import HSICAggInc, KSDAggInc, MMDAggInc
from .exceptions import ConfigError, InputError
from .harness import ExperimentPlan, emit_outputs, generate_data, run_experiment
from .models import GBRBMSpec, builtin_score_model
from .testing import TestConfig

EXIT_INPUT = 2
EXIT_CONFIG = 3
SEED_ENV = "INCAGG_SEED"


def read_matrix(path) -> np.ndarray:
    """Numeric CSV (optional header row) to a 2-d float array, one sample per row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputError(f"{path} contains no data rows")
    width = len(rows[0])
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from None
    if any(len(r) != width for r in rows):
        raise InputError(f"{path}: rows have inconsistent numbers of columns")
    if not np.all(np.isfinite(data)):
        raise InputError(f"{path}: NaN or infinite values")
    return data


def write_matrix(path, data: np.ndarray, prefix: str = "x") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"{prefix}{k}" for k in range(data.shape[1])])
        w.writerows(data.tolist())


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _add_test_flags(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--B1", type=int, default=500)
    p.add_argument("--B2", type=int, default=500)
    p.add_argument("--B3", type=int, default=50)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--R", type=int, default=None, help="number of sub-diagonals (default 200)")
    g.add_argument("--full", action="store_true", help="full (quadratic-time) design")
    g.add_argument("--random-L", type=int, default=None, dest="random_L", help="L pairs drawn at random")
    p.add_argument("--collection", choices=("median", "theoretical"), default="median")
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 42")


def _design_kwargs(args) -> dict:
    if args.full:
        return {"design": "full"}
    if args.random_L is not None:
        if args.random_L < 1:
            raise ConfigError(f"--random-L must be >= 1, got {args.random_L}")
        return {"design": "random", "L": args.random_L}
    R = 200 if args.R is None else args.R
    if R < 1:
        raise ConfigError(f"--R must be >= 1, got {R}")
    return {"design": "subdiagonal", "R": R}


def _common_kwargs(args) -> dict:
    TestConfig(alpha=args.alpha, B1=args.B1, B2=args.B2, B3=args.B3)
    seed = _default_seed() if args.seed is None else args.seed
    return dict(alpha=args.alpha, B1=args.B1, B2=args.B2, B3=args.B3, collection=args.collection, seed=seed,
                **_design_kwargs(args))


def _load_params(raw: str | None) -> dict:
    if raw is None:
        return {}
    if Path(raw).is_file():
        raw = Path(raw).read_text(encoding="utf-8")
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"model parameters are not valid JSON: {exc}") from None


def _emit_result(test, args) -> None:
    result = test.result_
    text = result.to_json(indent=2)
    print(text)
    if getattr(args, "out_json", None):
        Path(args.out_json).write_text(text + "\n", encoding="utf-8")
    verdict = "reject H0" if result.reject else "fail to reject H0"
    print(f"{args.command}: {verdict} (alpha={result.alpha}, L={result.l_used}, u_alpha={result.u_alpha:.4g})",
          file=sys.stderr)


def cmd_mmd(args):
    kw = _common_kwargs(args)
    X, Y = read_matrix(args.x), read_matrix(args.y)
    if len(X) != len(Y):
        print(f"warning: sample sizes differ ({len(X)} vs {len(Y)}); the larger sample is truncated",
              file=sys.stderr)
    _emit_result(MMDAggInc(**kw).fit(X, Y), args)


def cmd_hsic(args):
    kw = _common_kwargs(args)
    X = read_matrix(args.x)
    if args.y is None:
        if args.dx is None:
            raise ConfigError("with a single data file, --dx gives the number of X columns")
        X, Y = X[:, : args.dx], X[:, args.dx :]
    else:
        Y = read_matrix(args.y)
    _emit_result(HSICAggInc(**kw).fit(X, Y), args)


def cmd_ksd(args):
    kw = _common_kwargs(args)
    X = read_matrix(args.x)
    params = _load_params(args.model_params)
    if args.model == "gaussian" and not params:
        params = {"d": X.shape[1]}
    model = builtin_score_model(args.model, params)
    if model.dimension != X.shape[1]:
        raise InputError(f"model dimension {model.dimension} does not match data dimension {X.shape[1]}")
    _emit_result(KSDAggInc(model, kernel=args.kernel, **kw).fit(X), args)


def _plan_from_args(args) -> ExperimentPlan:
    config = TestConfig(alpha=args.alpha, B1=args.B1, B2=args.B2, B3=args.B3)
    if args.full:
        designs = ["full"]
    elif args.random_L is not None:
        designs = [f"L={args.random_L}"]
    elif args.R is not None:
        designs = [f"R={args.R}"]
    else:
        designs = args.designs
    seed = _default_seed() if args.seed is None else args.seed
    return ExperimentPlan(
        problem=args.problem, sweep=args.sweep, values=args.values, designs=designs, repetitions=args.reps,
        master_seed=seed, config=config, collection=args.collection, N=args.N, d=args.d, d_x=args.dx,
        d_y=args.dy, P=args.P, S=args.S, d_h=args.dh, sigma=args.sigma, burn_in=args.burn_in,
        thinning=args.thinning,
    )


def cmd_experiment(args):
    if args.R is not None and args.R < 1:
        raise ConfigError(f"--R must be >= 1, got {args.R}")
    plan = _plan_from_args(args)

    def progress(row):
        print(f"{row.label:>8}  {plan.sweep}={row.sweep_value:g}  rate={row.rejection_rate:.3f}  "
              f"runtime={row.mean_runtime:.4f}s  L={row.l_used}", file=sys.stderr)

    table = run_experiment(plan, jobs=args.jobs, progress=progress)
    emit_outputs(table, args.out_csv, args.out_json, args.out_svg)
    if not args.out_csv:
        from .harness import table_to_csv

        sys.stdout.write(table_to_csv(table))


def cmd_sample(args):
    plan = ExperimentPlan(problem=args.problem, N=args.N, d=args.d, d_x=args.dx, d_y=args.dy, P=args.P, S=args.S,
                          d_h=args.dh, sigma=args.sigma, burn_in=args.burn_in, thinning=args.thinning,
                          repetitions=1, designs=["full"])
    seed = _default_seed() if args.seed is None else args.seed
    if plan.problem == "goodness_of_fit":
        rng = np.random.default_rng([seed, 0])
        p = GBRBMSpec.random(plan.d_x, plan.d_h, rng)
        q = p.perturbed(plan.sigma, rng)
        from .models import gbrbm_sample

        write_matrix(args.out_x, gbrbm_sample(q, plan.N, rng, plan.burn_in, plan.thinning))
        if args.out_model:
            Path(args.out_model).write_text(p.to_json() + "\n", encoding="utf-8")
        return
    X, Y = generate_data(plan, seed)
    write_matrix(args.out_x, X)
    if args.out_y:
        write_matrix(args.out_y, Y, prefix="y")


def _add_model_flags(p):
    p.add_argument("--N", type=int, default=500)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--dx", type=int, default=1)
    p.add_argument("--dy", type=int, default=1)
    p.add_argument("--P", type=int, default=2)
    p.add_argument("--S", type=float, default=2.0, help="inverse perturbation scale; inf gives the null")
    p.add_argument("--dh", type=int, default=40)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--burn-in", type=int, default=200, dest="burn_in")
    p.add_argument("--thinning", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incagg", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mmdagginc", help="two-sample test")
    p.add_argument("x")
    p.add_argument("y")
    _add_test_flags(p)
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_mmd)

    p = sub.add_parser("hsicagginc", help="independence test on paired samples")
    p.add_argument("x")
    p.add_argument("y", nargs="?")
    p.add_argument("--dx", type=int, help="split a single file after this many columns")
    _add_test_flags(p)
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_hsic)

    p = sub.add_parser("ksdagginc", help="goodness-of-fit test against a score model")
    p.add_argument("x")
    p.add_argument("--model", choices=("gaussian", "gbrbm"), required=True)
    p.add_argument("--model-params", dest="model_params", help="JSON file or inline JSON")
    p.add_argument("--kernel", choices=("imq", "gaussian"), default="imq")
    _add_test_flags(p)
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_ksd)

    p = sub.add_parser("experiment", help="level/power/runtime sweep")
    p.add_argument("--problem", default="mmd")
    p.add_argument("--sweep", default="sample_size", choices=("sample_size", "dimension", "difficulty", "R"))
    p.add_argument("--values", type=float, nargs="+", default=[200, 400, 600, 800, 1000])
    p.add_argument("--designs", nargs="+", default=["R=1", "R=100", "R=200", "full"])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-svg", dest="out_svg")
    _add_test_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sample", help="write a synthetic dataset to CSV")
    p.add_argument("--problem", default="mmd")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-x", dest="out_x", required=True)
    p.add_argument("--out-y", dest="out_y")
    p.add_argument("--out-model", dest="out_model", help="GBRBM model p as JSON (goodness-of-fit)")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sample)
    return parser


def _int_values(values):
    return [int(v) if float(v).is_integer() else v for v in values]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "values"):
        args.values = _int_values(args.values)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    warnings.simplefilter("default")
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
