"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed, 2 usage error,
3 numerical failure (including a diverging worst case).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .calibration import ProblemSpec, solve_a_star, solve_tau_star
from .numerics import NumericsError
from .regret import (
    SURFACE_HEADER,
    DivergingWorstCaseError,
    StatePoint,
    regret_distribution,
    regret_surface,
    worst_case_msr,
)
from .rules import (
    MEAN_REGRET_THRESHOLD,
    ConstantHalf,
    MeanRegretStep,
    mean_regret_rule,
    msr_optimal_rule,
    point_id_rule,
)
from .verification import format_table, run_suite

DEFAULT_K_LIST = "0,0.5,1.0,1.2533,2.0,inf"
UNITS = "welfare units"
RULE_NAMES = ("msr", "mean-regret", "point-id", "half")


def _k_value(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        k = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be a number >= 0 or 'inf', got {text!r}") from None
    if not (k >= 0 and math.isfinite(k)):
        raise argparse.ArgumentTypeError(f"k must be a number >= 0 or 'inf', got {text!r}")
    return k


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _k_list(text: str) -> list[float]:
    return [_k_value(part) for part in text.split(",") if part.strip()]


def _num(x) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _k_json(k: float):
    return "inf" if math.isinf(k) else k


def build_rule(name: str, k: float, sigma: float):
    if name == "half":
        return ConstantHalf()
    if name == "point-id":
        return point_id_rule(sigma)
    if math.isinf(k):
        return ConstantHalf()
    spec = ProblemSpec(k, sigma)
    if name == "msr":
        return msr_optimal_rule(spec) if k > 0 else point_id_rule(sigma)
    return mean_regret_rule(spec)


def _emit(args, payload=None, rows=None, header=None, text=None):
    if text is None:
        if args.format == "json":
            text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
        else:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([[_num(v) for v in row] for row in rows])
            text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _finite_spec(parser, args) -> ProblemSpec:
    if math.isinf(args.k):
        parser.error("k = inf is only accepted by calibrate, rule and figure1")
    return ProblemSpec(args.k, args.sigma)


def cmd_calibrate(parser, args):
    ts, value = solve_tau_star()
    if math.isinf(args.k):
        rule = ConstantHalf()
        flat = {"tau_star": ts, "tau_star_value": value, "a_star": 0.0, "worst_case_msr": None, "foc_residual": None}
        calibration = None
    else:
        spec = ProblemSpec(args.k, args.sigma)
        cal = solve_a_star(spec)
        rule = msr_optimal_rule(spec) if args.k > 0 else point_id_rule(args.sigma)
        flat = {
            "tau_star": cal.tau_star,
            "tau_star_value": value,
            "a_star": cal.a_star,
            "worst_case_msr": cal.worst_case_msr,
            "foc_residual": cal.foc_residual,
        }
        calibration = cal.to_dict()
    if args.format == "csv":
        row = {"k": _k_json(args.k), "sigma": args.sigma, "rule": rule.variant, **flat}
        _emit(args, rows=[["" if v is None else v for v in row.values()]], header=list(row))
    else:
        _emit(
            args,
            {
                "k": _k_json(args.k),
                "sigma": args.sigma,
                "units": UNITS,
                "rule": rule.to_dict(),
                **flat,
                "calibration": calibration,
            },
        )


def cmd_rule(parser, args):
    rule = build_rule(args.rule, args.k, args.sigma)
    fraction = rule(args.obs)
    if args.format == "json":
        _emit(
            args,
            {
                "k": _k_json(args.k),
                "sigma": args.sigma,
                "observation": args.obs,
                "rule": rule.to_dict(),
                "fraction": fraction,
            },
        )
    else:
        _emit(args, text=f"{fraction:.12g}\n")


def cmd_surface(parser, args):
    spec = _finite_spec(parser, args)
    rule = build_rule(args.rule, spec.k, spec.sigma)
    rows = regret_surface(rule, spec, args.grid_min, args.grid_max, args.grid_points)
    if args.format == "json":
        _emit(
            args,
            {
                "k": spec.k,
                "sigma": spec.sigma,
                "units": UNITS,
                "rule": rule.to_dict(),
                "columns": list(SURFACE_HEADER),
                "rows": [list(r) for r in rows],
            },
        )
    else:
        _emit(args, rows=rows, header=SURFACE_HEADER)


def figure1_table(k: float, z, sigma: float = 1.0):
    """Rows (z, msr rule, mean-regret rule) with z the observation in units of sigma."""
    msr = build_rule("msr", k, sigma)
    mr = build_rule("mean-regret", k, sigma)
    return [(float(x), float(msr(float(x) * sigma)), float(mr(float(x) * sigma))) for x in z]


def cmd_figure1(parser, args):
    z = np.linspace(args.grid_min, args.grid_max, args.grid_points)
    tables = [(k, figure1_table(k, z, args.sigma)) for k in args.k_list]
    if args.format == "json":
        _emit(
            args,
            {
                "sigma": args.sigma,
                "units": UNITS,
                "k_list": [_k_json(k) for k in args.k_list],
                "k_list_canonical": False,
                "mean_regret_threshold": MEAN_REGRET_THRESHOLD,
                "tables": [
                    {"k": _k_json(k), "columns": ["z", "msr_rule", "mean_regret_rule"], "rows": [list(r) for r in t]}
                    for k, t in tables
                ],
            },
        )
    else:
        rows = [(_k_json(k), *r) for k, t in tables for r in t]
        _emit(args, rows=rows, header=("k", "z", "msr_rule", "mean_regret_rule"))


def cmd_worst_case(parser, args):
    spec = _finite_spec(parser, args)
    rule = build_rule(args.rule, spec.k, spec.sigma)
    res = worst_case_msr(rule, spec, args.method)
    _emit(args, {"k": spec.k, "sigma": spec.sigma, "units": UNITS, "rule": rule.to_dict(), "result": res.to_dict()})


def cmd_mc_regret(parser, args):
    spec = _finite_spec(parser, args)
    state = StatePoint(args.theta_e, args.theta_t)
    if not state.in_space(spec):
        parser.error(f"|theta_t - theta_e| must be <= k = {spec.k}")
    rule = build_rule(args.rule, spec.k, spec.sigma)
    report = regret_distribution(rule, state, spec.sigma, args.draws, args.seed)
    _emit(
        args,
        {
            "k": spec.k,
            "sigma": spec.sigma,
            "units": UNITS,
            "seed": args.seed,
            "rule": rule.to_dict(),
            "state": {"theta_e": state.theta_e, "theta_t": state.theta_t},
            "report": report.to_dict(),
        },
    )


def cmd_verify(parser, args):
    specs = []
    for k in args.k_list:
        if math.isinf(k):
            parser.error("verify needs finite k values")
        specs.append(ProblemSpec(k, args.sigma))
    outcomes = run_suite(specs, include_sandwich=not args.skip_sandwich)
    if args.format == "json":
        _emit(args, {"all_passed": all(o.passed for o in outcomes), "checks": [o.to_dict() for o in outcomes]})
    else:
        _emit(args, text=format_table(outcomes) + "\n")
    return 0 if all(o.passed for o in outcomes) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msrchoice",
        description="Minimax mean-square-regret treatment rules under partial identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt="json", need_k=True):
        if need_k:
            p.add_argument("--k", type=_k_value, required=True, help="identified-set half-width, or 'inf'")
        p.add_argument("--sigma", type=_positive, default=1.0, help="standard deviation of the estimate")
        p.add_argument("--format", choices=("csv", "json"), default=fmt)
        p.add_argument("--out", help="write here instead of standard output")

    def grid(p, lo, hi, n):
        p.add_argument("--grid-min", type=_finite, default=lo)
        p.add_argument("--grid-max", type=_finite, default=hi)
        p.add_argument("--grid-points", type=int, default=n)

    p = sub.add_parser("calibrate", help="solve for tau* and a*")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rule", help="treated fraction at one observation")
    common(p, fmt=None)
    p.add_argument("--rule", choices=RULE_NAMES, default="msr")
    p.add_argument("--obs", type=_finite, required=True)
    p.set_defaults(func=cmd_rule)

    p = sub.add_parser("surface", help="MSR and mean regret over a grid of states")
    common(p, fmt="csv")
    p.add_argument("--rule", choices=RULE_NAMES, default="msr")
    grid(p, -3.0, 3.0, 61)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("figure1", help="both minimax rules over z for several k")
    common(p, fmt="csv", need_k=False)
    p.add_argument("--k-list", type=_k_list, default=_k_list(DEFAULT_K_LIST))
    grid(p, -4.0, 4.0, 401)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("worst-case", help="worst-case MSR of a rule")
    common(p)
    p.add_argument("--rule", choices=RULE_NAMES, default="msr")
    p.add_argument("--method", choices=("auto", "reduced", "grid2d"), default="auto")
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("mc-regret", help="Monte Carlo regret distribution at one state")
    common(p)
    p.add_argument("--rule", choices=RULE_NAMES, default="msr")
    p.add_argument("--theta-e", type=_finite, required=True)
    p.add_argument("--theta-t", type=_finite, required=True)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_mc_regret)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    common(p, fmt="csv", need_k=False)
    p.add_argument("--k-list", type=_k_list, default=_k_list("0.1,1,10"))
    p.add_argument("--skip-sandwich", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "grid_points", 2) < 2:
        parser.error("--grid-points must be at least 2")
    if getattr(args, "grid_min", 0) >= getattr(args, "grid_max", 1):
        parser.error("--grid-min must be below --grid-max")
    if getattr(args, "draws", 1) < 1:
        parser.error("--draws must be positive")
    try:
        code = args.func(parser, args)
    except (DivergingWorstCaseError, NumericsError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
