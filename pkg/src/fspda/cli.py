"""Command-line front end.

Three subcommands: ``estimate`` runs the full pipeline on a CSV panel,
``simulate`` drives the Monte Carlo lab from a scenario file, and
``oracle-check`` compares the greedy path against exhaustive best-subset
search. Exit codes: 0 on success, 2 for data or configuration errors,
3 for numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys

from .exceptions import DataError, NumericError
from .inference import KERNEL_BARTLETT, KERNEL_TRUNCATED
from .io import EstimateRequest, cmd_estimate, cmd_oracle_check, cmd_simulate

EXIT_OK = 0
EXIT_DATA_ERROR = 2
EXIT_NUMERIC_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fspda",
        description="Panel-data program evaluation with greedy control selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate treatment effects from a CSV panel")
    est.add_argument("--input", required=True, help="wide CSV: period column then one column per unit")
    est.add_argument("--treated", required=True, help="column name of the treated unit")
    est.add_argument("--treatment-at", required=True, help="period label of the first post-treatment row")
    est.add_argument("--exclude", default="", help="comma-separated unit columns to drop")
    est.add_argument("--r-max", type=int, default=None, help="cap on selection steps")
    est.add_argument("--bic-constant", type=float, default=1.0, help="stopping-rule penalty constant")
    est.add_argument("--lag", type=int, default=None, help="long-run variance truncation lag")
    est.add_argument(
        "--kernel",
        choices=[KERNEL_TRUNCATED, KERNEL_BARTLETT],
        default=KERNEL_TRUNCATED,
        help="long-run variance kernel (bartlett is the positive fallback)",
    )
    est.add_argument("--intercept", choices=["on", "off"], default="on")
    est.add_argument("--alpha", type=float, default=0.05, help="two-sided test size")
    est.add_argument("--output", required=True, help="JSON report path")
    est.add_argument("--plot-output", default=None, help="plot-data CSV path (default: <output>_plot.csv)")
    est.add_argument("--no-meta", action="store_true", help="omit timestamps from the report")

    sim = sub.add_parser("simulate", help="run a Monte Carlo scenario")
    sim.add_argument("--scenario", required=True, help="key = value scenario file")
    sim.add_argument("--output", required=True, help="JSON report path")
    sim.add_argument("--workers", type=int, default=None, help="parallel replication workers")
    sim.add_argument("--no-meta", action="store_true", help="omit timestamps and wall time")

    orc = sub.add_parser("oracle-check", help="greedy-vs-best-subset frequency check")
    orc.add_argument("--scenario", required=True, help="key = value scenario file")
    orc.add_argument("--subset-size", type=int, required=True, help="best-subset cardinality cap")
    orc.add_argument("--delta", type=float, required=True, help="allowed variance gap")
    orc.add_argument("--output", default=None, help="JSON verdict path (default: stdout)")
    orc.add_argument("--no-meta", action="store_true", help="omit timestamps")
    return parser


def _run_estimate(args) -> int:
    excluded = tuple(s.strip() for s in args.exclude.split(",") if s.strip())
    request = EstimateRequest(
        input_path=args.input,
        treated_column=args.treated,
        treatment_marker=args.treatment_at,
        output_path=args.output,
        plot_path=args.plot_output,
        excluded=excluded,
        r_max=args.r_max,
        bic_constant=args.bic_constant,
        tau=args.lag,
        kernel=args.kernel,
        intercept=args.intercept == "on",
        alpha=args.alpha,
        no_meta=args.no_meta,
    )
    document = cmd_estimate(request)
    print(
        f"ate={document['ate']:.6g} z={document['z_stat']:.4f} "
        f"p={document['p_value']:.4g} selected={document['model']['selected_labels']}"
    )
    print(f"report written to {args.output}")
    return EXIT_OK


def _run_simulate(args) -> int:
    document = cmd_simulate(
        args.scenario, args.output, workers=args.workers, no_meta=args.no_meta
    )
    for report in document["reports"]:
        print(
            f"{report['treatment']}: reject={report['rejection_rate']:.4f} "
            f"rmpse={report['rmpse']:.4f} median_selected={report['median_selected']:g}"
        )
    print(f"report written to {args.output}")
    return EXIT_OK


def _run_oracle_check(args) -> int:
    document = cmd_oracle_check(
        args.scenario,
        subset_size=args.subset_size,
        delta=args.delta,
        output_path=args.output,
        no_meta=args.no_meta,
    )
    if args.output:
        print(f"frequency={document['frequency']:.4f}")
        print(f"verdict written to {args.output}")
    else:
        print(json.dumps(document, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    runner = {
        "estimate": _run_estimate,
        "simulate": _run_simulate,
        "oracle-check": _run_oracle_check,
    }[args.command]
    try:
        return runner(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
