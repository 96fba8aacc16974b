"""Command-line interface.

Subcommands:
  check     load parameters + data, run the full certification, emit a JSON verdict
  train     generate (or load) data, run full-batch Adam, save trained parameters
  stats     multi-seed training runs with boundary statistics, aggregate table
  synth     construct exact-boundary stationary fixtures
  selftest  fast built-in oracle checks

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal inconsistency
(for example a descent direction that fails its own line-search validation).
The environment variable SOSP_SEED, when set, overrides every seed argument.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .checker import CheckConfig, sosp_check
from .errors import (
    InternalInconsistencyError,
    NoDecreaseFoundError,
    SospcheckError,
)
from .harness import (
    AdamConfig,
    StatThresholds,
    TrendConfig,
    adam_train,
    construct_boundary_fosp,
    construct_indefinite_fosp,
    dataset_from_dict,
    dataset_to_dict,
    generate_dataset,
    init_params,
    load_json,
    params_from_dict,
    params_to_dict,
    run_boundary_trend,
    save_json,
)
from .network import SquaredLoss


def _seed(args) -> int:
    env = os.environ.get("SOSP_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _cmd_check(args) -> int:
    try:
        params = params_from_dict(load_json(args.params))
        data = dataset_from_dict(load_json(args.data))
    except (OSError, KeyError, ValueError, SospcheckError) as exc:
        print(f"error: could not load inputs: {exc}", file=sys.stderr)
        return 2
    config = CheckConfig(boundary_tol=args.boundary_tol, seed=_seed(args))
    verdict = sosp_check(params, data, SquaredLoss(), config)
    report = {"schema_version": harness.SCHEMA_VERSION, **verdict.as_dict()}
    if args.out:
        save_json(args.out, report)
    else:
        json.dump(report, sys.stdout, indent=1)
        print()
    print(f"verdict: {verdict.kind}" + (f" (stage: {verdict.stage})" if verdict.stage else ""))
    return 0


def _cmd_train(args) -> int:
    seed = _seed(args)
    if args.data:
        try:
            data = dataset_from_dict(load_json(args.data))
        except (OSError, KeyError, ValueError, SospcheckError) as exc:
            print(f"error: could not load data: {exc}", file=sys.stderr)
            return 2
    else:
        data = generate_dataset(args.dx, args.dy, args.m, seed=seed)
    params0 = init_params(data.d_x, args.dh, data.d_y, seed=seed + 10_000)
    cfg = AdamConfig(lr=args.lr, iters=args.iters, decay_every=args.decay_every)
    params, trace = adam_train(params0, data, config=cfg)
    save_json(args.out, params_to_dict(params))
    if args.save_data:
        save_json(args.save_data, dataset_to_dict(data))
    print(f"final risk: {trace[-1][1]:.6e} after {trace[-1][0]} iterations -> {args.out}")
    return 0


def _cmd_stats(args) -> int:
    seed = _seed(args)
    iters = 200_000 if args.full_budget else args.iters
    decay = 20_000 if args.full_budget else args.decay_every
    runs = 40 if args.full_budget else args.runs
    cfg = TrendConfig(
        d_x=args.dx,
        d_h=args.dh,
        d_y=args.dy,
        m=args.m,
        runs=runs,
        seed=seed,
        adam=AdamConfig(iters=iters, decay_every=decay),
        thresholds=StatThresholds(boundary=args.boundary_tol),
    )
    agg = run_boundary_trend(cfg)
    header = f"({args.dx},{args.dh},{args.m})"
    print(f"{'config':>15} {'runs':>5} {'Sum M (Avg.)':>16} {'Sum L (Avg.)':>16} "
          f"{'Sum K (Avg.)':>16} {'P(L>0)':>8}")
    print(
        f"{header:>15} {agg['runs']:>5} "
        f"{agg['sum_m']:>7} ({agg['avg_m']:.3f}) "
        f"{agg['sum_l']:>7} ({agg['avg_l']:.3f}) "
        f"{agg['sum_k']:>7} ({agg['avg_k']:.3f}) "
        f"{agg['p_l_positive']:>8.3f}"
    )
    if args.out:
        save_json(args.out, {"schema_version": harness.SCHEMA_VERSION, **agg})
    return 0


def _cmd_synth(args) -> int:
    seed = _seed(args)
    if args.mode == "indefinite":
        point = construct_indefinite_fosp(args.dx, args.dh, args.dy, seed=seed)
    else:
        point = construct_boundary_fosp(
            args.dx,
            args.dh,
            args.dy,
            seed=seed,
            n_boundary=args.boundary,
            mode=args.mode,
        )
    save_json(args.out_params, params_to_dict(point.params))
    save_json(args.out_data, dataset_to_dict(point.data))
    print(
        f"constructed {point.mode} fixture: unit {point.unit}, "
        f"boundary samples {point.boundary_samples} -> {args.out_params}, {args.out_data}"
    )
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sospcheck",
        description="Certify local minimality / second-order stationarity of "
        "one-hidden-layer piecewise-linear networks, or produce a verified "
        "descent direction.",
    )
    sub = parser.add_subparsers(dest="command")

    p_check = sub.add_parser("check", help="certify a parameter point")
    p_check.add_argument("--params", required=True)
    p_check.add_argument("--data", required=True)
    p_check.add_argument("--out", default=None)
    p_check.add_argument("--boundary-tol", type=float, default=0.0)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.set_defaults(func=_cmd_check)

    p_train = sub.add_parser("train", help="full-batch Adam training")
    p_train.add_argument("--dx", type=int, default=10)
    p_train.add_argument("--dh", type=int, default=1)
    p_train.add_argument("--dy", type=int, default=1)
    p_train.add_argument("--m", type=int, default=1000)
    p_train.add_argument("--iters", type=int, default=20_000)
    p_train.add_argument("--decay-every", type=int, default=2_000)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--data", default=None, help="load data instead of generating")
    p_train.add_argument("--save-data", default=None)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=_cmd_train)

    p_stats = sub.add_parser("stats", help="multi-seed boundary statistics")
    p_stats.add_argument("--dx", type=int, default=10)
    p_stats.add_argument("--dh", type=int, default=1)
    p_stats.add_argument("--dy", type=int, default=1)
    p_stats.add_argument("--m", type=int, default=1000)
    p_stats.add_argument("--runs", type=int, default=10)
    p_stats.add_argument("--iters", type=int, default=20_000)
    p_stats.add_argument("--decay-every", type=int, default=2_000)
    p_stats.add_argument("--boundary-tol", type=float, default=1e-5)
    p_stats.add_argument("--seed", type=int, default=0)
    p_stats.add_argument("--out", default=None)
    p_stats.add_argument(
        "--full-budget",
        action="store_true",
        help="40 runs x 200k iterations with decay every 20k",
    )
    p_stats.set_defaults(func=_cmd_stats)

    p_synth = sub.add_parser("synth", help="construct stationary fixtures")
    p_synth.add_argument("--dx", type=int, default=4)
    p_synth.add_argument("--dh", type=int, default=2)
    p_synth.add_argument("--dy", type=int, default=1)
    p_synth.add_argument("--boundary", type=int, default=1)
    p_synth.add_argument(
        "--mode",
        choices=["interior", "edge", "orthogonal", "ray_descent", "subdiff_descent", "indefinite"],
        default="interior",
    )
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-params", required=True)
    p_synth.add_argument("--out-data", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_self = sub.add_parser("selftest", help="run the built-in oracle checks")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (InternalInconsistencyError, NoDecreaseFoundError) as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return 3
    except SospcheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
