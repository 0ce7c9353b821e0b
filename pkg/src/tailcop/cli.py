"""Command line interface.

Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
data errors (unreadable files, ties, missing values).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .bootstrap import build_ensemble
from .estimators import DataError, EmpiricalTailCopula, read_sample
from .harness import ConfigError, load_config, run_campaign
from .inference import (
    AngularGrid,
    gof_test,
    md_bootstrap,
    md_confidence_interval,
    md_estimate,
    two_sample_test,
)
from .models import FAMILIES

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailcop",
        description="Tail copula estimation, bootstrap and testing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation campaign")
    p_run.add_argument("config", help="campaign config file (json or yaml)")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--scale", type=float,
                       help="replication scale factor (overrides config)")
    p_run.add_argument("--seed", type=int, help="seed (overrides config)")
    p_run.set_defaults(func=_cmd_run)

    p_est = sub.add_parser("estimate", help="evaluate the empirical tail "
                           "copula on a csv sample")
    p_est.add_argument("--input", dest="data", required=True,
                       help="csv file with two numeric columns")
    p_est.add_argument("--k", type=int, required=True)
    p_est.add_argument("--tail", choices=("lower", "upper"), default="lower")
    p_est.add_argument("--rule", choices=("rank", "copula"), default=None)
    p_est.add_argument("--grid", type=int, default=None,
                       help="evaluate on an angular midpoint grid of this "
                       "size (default 100)")
    p_est.add_argument("--at", action="append", default=None,
                       metavar="X1,X2", help="evaluate at this point "
                       "(repeatable; disables --grid)")
    p_est.add_argument("--delimiter", default=",")
    p_est.add_argument("--out", help="write csv here instead of stdout")
    p_est.set_defaults(func=_cmd_estimate)

    p_eq = sub.add_parser("test-equal", help="two-sample test of equal "
                          "tail copulas")
    p_eq.add_argument("--x", dest="data_x", required=True,
                      help="first sample (csv)")
    p_eq.add_argument("--y", dest="data_y", required=True,
                      help="second sample (csv)")
    p_eq.add_argument("--k1", type=int, required=True)
    p_eq.add_argument("--k2", type=int, required=True)
    p_eq.add_argument("--B", type=int, default=500)
    p_eq.add_argument("--alpha", type=float, default=0.05)
    p_eq.add_argument("--kind", choices=("pdm", "dm"), default="pdm")
    p_eq.add_argument("--grid", type=int, default=100)
    p_eq.add_argument("--tail", choices=("lower", "upper"), default="lower")
    p_eq.add_argument("--seed", type=int, default=0)
    p_eq.add_argument("--delimiter", default=",")
    p_eq.add_argument("--json", dest="json_out",
                      help="write the full report here")
    p_eq.set_defaults(func=_cmd_test_equal)

    p_gof = sub.add_parser("gof", help="goodness-of-fit test for a "
                           "parametric family")
    p_gof.add_argument("--input", dest="data", required=True)
    p_gof.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p_gof.add_argument("--k", type=int, required=True)
    p_gof.add_argument("--B", type=int, default=500)
    p_gof.add_argument("--alpha", type=float, default=0.05)
    p_gof.add_argument("--kind", choices=("pdm", "dm"), default="pdm")
    p_gof.add_argument("--grid", type=int, default=100)
    p_gof.add_argument("--tail", choices=("lower", "upper"), default="lower")
    p_gof.add_argument("--seed", type=int, default=0)
    p_gof.add_argument("--delimiter", default=",")
    p_gof.add_argument("--json", dest="json_out")
    p_gof.set_defaults(func=_cmd_gof)

    p_md = sub.add_parser("md", help="minimum-distance parameter estimate "
                          "with a bootstrap confidence interval")
    p_md.add_argument("--input", dest="data", required=True)
    p_md.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p_md.add_argument("--k", type=int, required=True)
    p_md.add_argument("--alpha", type=float, default=0.05,
                      help="confidence interval level 1-alpha")
    p_md.add_argument("--no-ci", action="store_true",
                      help="report the point estimate only")
    p_md.add_argument("--B", type=int, default=500)
    p_md.add_argument("--kind", choices=("pdm", "dm"), default="pdm")
    p_md.add_argument("--grid", type=int, default=100)
    p_md.add_argument("--tail", choices=("lower", "upper"), default="lower")
    p_md.add_argument("--seed", type=int, default=0)
    p_md.add_argument("--delimiter", default=",")
    p_md.add_argument("--json", dest="json_out")
    p_md.set_defaults(func=_cmd_md)

    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.scale is not None:
        cfg.scale = args.scale
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    result = run_campaign(cfg, workers=args.workers)
    sys.stdout.write(result.to_csv_text())
    if cfg.out:
        paths = result.write(cfg.out)
        print(f"wrote {paths['results']} and {paths['manifest']}",
              file=sys.stderr)
    return 0


def _parse_point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"point {text!r} is not of the form X1,X2")
    try:
        x1, x2 = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"point {text!r}: {exc}") from exc
    if math.isnan(x1) or math.isnan(x2) or x1 < 0 or x2 < 0:
        raise ConfigError(f"point {text!r} must be nonnegative")
    return x1, x2


def _cmd_estimate(args) -> int:
    sample = read_sample(args.data, delimiter=args.delimiter)
    if not 1 <= args.k <= sample.n:
        raise ConfigError(f"k={args.k} outside [1, n={sample.n}]")
    est = EmpiricalTailCopula(sample, args.k, tail=args.tail)
    kwargs = {} if args.rule is None else {"rule": args.rule}
    lines = []
    if args.at:
        points = [_parse_point(t) for t in args.at]
        lines.append("x1,x2,value")
        for x1, x2 in points:
            v = est.evaluate(x1, x2, **kwargs)
            lines.append(f"{x1:.10g},{x2:.10g},{v:.10g}")
    else:
        m = args.grid if args.grid is not None else 100
        if m < 1:
            raise ConfigError("--grid must be positive")
        grid = AngularGrid.midpoint(m)
        values = est.angular(grid.nodes, **kwargs)
        lines.append("phi,value")
        for phi, v in zip(grid.nodes, values):
            lines.append(f"{phi:.10g},{v:.10g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _check_k(k: int, n: int, label: str = "k"):
    if not 1 <= k <= n:
        raise ConfigError(f"{label}={k} outside [1, n={n}]")


def _print_report(report, json_out):
    print(f"test: {report.test}")
    print(f"kind: {report.kind}")
    print(f"statistic: {report.statistic:.10g}")
    print(f"p_value: {report.p_value:.10g}")
    print(f"alpha: {report.alpha:g}")
    print(f"critical_value: {report.quantile:.10g}")
    print(f"reject: {str(report.reject).lower()}")
    if json_out:
        report.to_json(json_out, include_bootstrap=True)
        print(f"wrote {json_out}", file=sys.stderr)


def _cmd_test_equal(args) -> int:
    sx = read_sample(args.data_x, delimiter=args.delimiter)
    sy = read_sample(args.data_y, delimiter=args.delimiter)
    _check_k(args.k1, sx.n, "k1")
    _check_k(args.k2, sy.n, "k2")
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    report = two_sample_test(
        sx, sy, args.k1, args.k2, B=args.B, alpha=args.alpha,
        kind=args.kind, grid=AngularGrid.midpoint(args.grid),
        rng=args.seed, tail=args.tail,
    )
    _print_report(report, args.json_out)
    return 0


def _cmd_gof(args) -> int:
    sample = read_sample(args.data, delimiter=args.delimiter)
    _check_k(args.k, sample.n)
    if not 0.0 < args.alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    report = gof_test(
        sample, args.k, args.family, B=args.B, alpha=args.alpha,
        kind=args.kind, grid=AngularGrid.midpoint(args.grid),
        rng=args.seed, tail=args.tail,
    )
    _print_report(report, args.json_out)
    print(f"theta_hat: {report.params['theta']:.10g}")
    return 0


def _cmd_md(args) -> int:
    sample = read_sample(args.data, delimiter=args.delimiter)
    _check_k(args.k, sample.n)
    grid = AngularGrid.midpoint(args.grid)
    est = EmpiricalTailCopula(sample, args.k, tail=args.tail)
    fit = md_estimate(est, args.k, args.family, grid=grid, tail=args.tail)
    payload = fit.to_dict()
    print(f"family: {fit.family}")
    print(f"theta: {fit.theta:.10g}")
    print(f"lambda: {fit.lambda_coef:.10g}")
    print(f"objective: {fit.objective:.10g}")
    if not args.no_ci:
        if not 0.0 < args.alpha < 1.0:
            raise ConfigError("--alpha must lie in (0, 1)")
        ens = build_ensemble(args.kind, est, args.k, args.B, grid.points(),
                             rng=args.seed, tail=args.tail)
        boot = md_bootstrap(est, args.k, args.family, fit.theta, ens,
                            grid=grid, tail=args.tail)
        lo, hi = md_confidence_interval(fit.theta, boot, args.k, args.alpha)
        payload["ci"] = {"alpha": args.alpha, "lower": lo, "upper": hi,
                         "kind": args.kind, "B": args.B, "seed": args.seed}
        print(f"ci_{100 * (1 - args.alpha):g}: [{lo:.10g}, {hi:.10g}]")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.json_out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
