"""Command-line entry points: simulate, audit-csv, region-scan, validate-theorems."""

import argparse
import sys

from . import harness


def _add_common(parser):
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="override the output directory")


def _resolve(args, extra=None):
    overrides = {"seed": args.seed, "output_dir": args.out}
    overrides.update(extra or {})
    return harness.load_config(args.config, overrides)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="missfair",
        description="Simulate group-specific missingness, impute, and audit fairness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="repeated synthetic experiment, CSV report")
    _add_common(p)
    p.add_argument("--repetitions", type=int, help="number of repetitions")
    p.add_argument("--threads", type=int, help="worker threads across repetitions")

    p = sub.add_parser("audit-csv", help="audit imputers on an external CSV")
    _add_common(p)
    p.add_argument("--input", help="CSV path (overrides csv.path from the config)")
    p.add_argument("--group-column", help="name of the 0/1 group column")
    p.add_argument("--outcome-column", help="name of the 0/1 outcome column")

    p = sub.add_parser("region-scan", help="closed-form gap map over a rho grid")
    _add_common(p)

    p = sub.add_parser("validate-theorems",
                       help="Monte Carlo check of the closed-form error formulas")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=0.02)

    p = sub.add_parser("make-standin", help="write a stand-in CSV for audit-csv")
    p.add_argument("--out", required=True, help="destination CSV path")
    p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "simulate":
        config = _resolve(args, {"repetitions": args.repetitions, "threads": args.threads})
        report = harness.run_simulation(config)
        path = report.write(config["output_dir"])
        print(f"wrote {path}")
        return 0

    if args.command == "audit-csv":
        config = _resolve(args)
        csv_spec = dict(config.get("csv") or {})
        if args.input:
            csv_spec["path"] = args.input
        if args.group_column:
            csv_spec["group_column"] = args.group_column
        if args.outcome_column:
            csv_spec["outcome_column"] = args.outcome_column
        config["csv"] = csv_spec
        report = harness.run_csv_audit(config)
        path = report.write(config["output_dir"])
        print(f"wrote {path}")
        return 0

    if args.command == "region-scan":
        config = _resolve(args)
        report = harness.run_region_scan(config)
        path = report.write(config["output_dir"])
        print(f"wrote {path}")
        return 0

    if args.command == "validate-theorems":
        lines, ok = harness.run_theorem_validation(
            n_cases=args.cases, n=args.samples, seed=args.seed, tolerance=args.tolerance)
        print("\n".join(lines))
        print("all within tolerance" if ok else "TOLERANCE EXCEEDED")
        return 0 if ok else 1

    if args.command == "make-standin":
        print(f"wrote {harness.make_standin(args.out, seed=args.seed)}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
