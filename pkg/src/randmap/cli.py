"""Command-line entry point.

Subcommands: simulate, exact, gw (survival | progeny | founders),
constants, fit.  Exit codes: 0 success, 2 invalid configuration,
3 budget guard, 4 fit failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .asymptotics import FitError
from .exact import GuardError, height_count_table, height_table_csv
from .experiments import (
    ConfigError,
    ExperimentConfig,
    parse_event,
    rows_from_csv,
    rows_to_csv,
    rows_to_json,
    run_constants,
    run_exact,
    run_fit,
    run_gw_founders,
    run_gw_progeny,
    run_gw_survival,
    run_simulate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_FIT = 4


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo event estimates over uniform mappings")
    sim.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    sim.add_argument("--samples", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument(
        "--event",
        required=True,
        choices=[
            "unique-highest",
            "two-highest",
            "k-highest",
            "crown-ok",
            "margin2",
            "c-branch-unique",
            "c-crown-ok",
        ],
    )
    sim.add_argument("--k", type=int, default=None, help="tie count for k-highest")
    sim.add_argument("--c", type=int, default=None, help="branch level for c-* events")
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.add_argument("--out", default=None)
    sim.add_argument("--force", action="store_true", help="override the budget guard")
    sim.add_argument(
        "--no-timing",
        action="store_true",
        help="write 0.0 wall times for byte-reproducible output",
    )

    exact = sub.add_parser("exact", help="exact enumeration tables for small n")
    exact.add_argument("--max-n", type=int, required=True)
    exact.add_argument("--force", action="store_true")
    exact.add_argument("--out", default=None)
    exact.add_argument(
        "--heights-h", type=_int_list, default=None, help="also emit the height-count table at these h"
    )
    exact.add_argument("--heights-n", type=_int_list, default=None, help="sizes for the height-count table")

    gw = sub.add_parser("gw", help="branching-process verification runs")
    gw.add_argument("kind", choices=["survival", "progeny", "founders"])
    gw.add_argument("--t", type=int, default=100, help="survival horizon")
    gw.add_argument("--trials", type=int, required=True)
    gw.add_argument("--seed", type=int, required=True)
    gw.add_argument("--founders", type=int, default=None, help="founder count (progeny: 3, founders: 100)")
    gw.add_argument("--out", default=None)

    const = sub.add_parser("constants", help="both candidate constants and the series record")
    const.add_argument("--tol", type=float, default=1e-9)
    const.add_argument("--out", default=None)

    fit = sub.add_parser("fit", help="sqrt(n) fit of simulate rows")
    fit.add_argument("--input", required=True, help="CSV produced by simulate")
    fit.add_argument(
        "--complement", action="store_true", help="fit 1 - p_hat instead of p_hat"
    )
    fit.add_argument("--out", default=None)

    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            event = parse_event(args.event, k=args.k, c=args.c)
            cfg = ExperimentConfig(
                n=tuple(args.n),
                samples=args.samples,
                seed=args.seed,
                event=event,
                threads=args.threads,
                fmt=args.format,
                out=args.out,
                force=args.force,
                timing=not args.no_timing,
            )
            rows = run_simulate(cfg)
            text = rows_to_csv(rows) if cfg.fmt == "csv" else rows_to_json(rows)
            _emit(text, args.out)
        elif args.command == "exact":
            report = run_exact(args.max_n, force=args.force)
            if args.heights_h:
                if not args.heights_n:
                    raise ConfigError("--heights-h needs --heights-n")
                rows = height_count_table(args.heights_n, args.heights_h)
                report["height_table_csv"] = height_table_csv(rows)
            _emit(json.dumps(report, indent=2), args.out)
        elif args.command == "gw":
            if args.trials < 1:
                raise ConfigError("trials must be positive")
            if args.kind == "survival":
                rep = run_gw_survival(args.t, args.trials, args.seed)
            elif args.kind == "progeny":
                rep = run_gw_progeny(args.founders or 3, args.trials, args.seed)
            else:
                rep = run_gw_founders(args.founders or 100, args.trials, args.seed)
            _emit(json.dumps(rep, indent=2), args.out)
        elif args.command == "constants":
            _emit(json.dumps(run_constants(args.tol), indent=2), args.out)
        elif args.command == "fit":
            try:
                with open(args.input) as fh:
                    rows = rows_from_csv(fh.read())
            except OSError as exc:
                raise FitError(f"cannot read rows: {exc}") from exc
            report = run_fit(rows, complement=args.complement)
            _emit(json.dumps(report.to_dict(), indent=2), args.out)
    except GuardError as exc:
        print(f"budget guard: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FitError as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
