"""Command-line entry point.

Subcommands:
    run     simulate scenarios and write calibration artifacts
    verify  recompute calibration from serialized hierarchy/observation files
    report  regenerate diagnostics from stored histograms

Exit codes: 0 success, 2 configuration error, 3 numerical/runtime
failure, 4 acceptance-check failure under ``run --check``.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, MlmcForecastError
from .experiment import (
    SCENARIO_NAMES,
    load_config,
    normalize_config,
    run_all,
    verify_files,
)
from .verification import diagnose, read_histogram_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlmc-forecast",
        description="Multilevel ensemble forecasts and PIT-histogram calibration checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate one scenario or all four")
    run_p.add_argument("--config", type=Path, help="JSON config file (see README)")
    run_p.add_argument("--scenario", choices=list(SCENARIO_NAMES) + ["all"],
                       help="scenario to run (default: all)")
    run_p.add_argument("--seed", type=int, help="experiment seed (default 0)")
    run_p.add_argument("--out-dir", type=Path, help="artifact directory (default runs/)")
    run_p.add_argument("--bins", type=int, help="MLPIT histogram bins (default 20)")
    run_p.add_argument("--alpha", type=int,
                       help="forecast size multiple of the base ensemble (default 8)")
    run_p.add_argument("--full", action="store_true",
                       help="full-scale horizon 40000 instead of desk-scale 4000")
    run_p.add_argument("--burn-in", type=float,
                       help="exclude observation times <= this from the histograms")
    run_p.add_argument("--save-hierarchy", choices=["none", "final", "all"],
                       help="how much of the evolving hierarchy to serialize")
    run_p.add_argument("--check", action="store_true",
                       help="fail (exit 4) unless the run passes its self-checks")

    verify_p = sub.add_parser("verify", help="recompute calibration from files")
    verify_p.add_argument("--hierarchy", type=Path, required=True)
    verify_p.add_argument("--observations", type=Path, required=True)
    verify_p.add_argument("--seed", type=int, default=0)
    verify_p.add_argument("--alpha", type=int, default=8)
    verify_p.add_argument("--bins", type=int, default=20)
    verify_p.add_argument("--burn-in", type=float, default=0.0)
    verify_p.add_argument("--out-dir", type=Path)

    report_p = sub.add_parser("report", help="re-derive diagnostics from histograms")
    report_p.add_argument("--dir", type=Path, required=True,
                          help="directory holding mlpit.csv and pit_finest.csv")
    return parser


def _run_options(args) -> dict:
    if args.config is not None:
        cfg = dict(load_config(args.config))
    else:
        cfg = {"seed": 0}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.scenario is not None:
        cfg["scenarios"] = list(SCENARIO_NAMES) if args.scenario == "all" else [args.scenario]
    if args.bins is not None:
        cfg["bins"] = args.bins
    if args.alpha is not None:
        cfg["alpha"] = args.alpha
    if args.full:
        cfg["full"] = True
    if args.burn_in is not None:
        cfg["burn_in"] = args.burn_in
    if args.save_hierarchy is not None:
        cfg["save_hierarchy"] = args.save_hierarchy
    if args.out_dir is not None:
        cfg["out_dir"] = str(args.out_dir)
    return normalize_config(cfg)


def _self_check(report: dict, cfg: dict) -> list:
    problems = []
    expected_n_y = None
    for name, entry in report["scenarios"].items():
        if entry["classification"] != name:
            problems.append(
                f"{name}: MLPIT classified as {entry['classification']!r}"
            )
        if expected_n_y is None:
            expected_n_y = entry["observation_count"]
        elif entry["observation_count"] != expected_n_y:
            problems.append(f"{name}: observation count differs across scenarios")
        if entry["hierarchy_sizes"] != sorted(entry["hierarchy_sizes"], reverse=True):
            problems.append(f"{name}: hierarchy sizes are not non-increasing")
    return problems


def _cmd_run(args) -> int:
    cfg = _run_options(args)
    out_dir = cfg.pop("out_dir") or "runs"
    report = run_all(cfg, out_dir)
    for name, entry in report["scenarios"].items():
        print(f"{name}: {entry['classification']}"
              f" (sizes {entry['hierarchy_sizes']},"
              f" {entry['observation_count']} observations)")
    print(f"artifacts written to {out_dir}")
    if args.check:
        problems = _self_check(report, cfg)
        if problems:
            for p in problems:
                print(f"check failed: {p}", file=sys.stderr)
            return EXIT_CHECK
        print("all checks passed")
    return EXIT_OK


def _cmd_verify(args) -> int:
    artifacts = verify_files(
        args.hierarchy,
        args.observations,
        seed=args.seed,
        alpha=args.alpha,
        bins=args.bins,
        burn_in=args.burn_in,
        out_dir=args.out_dir,
    )
    print(f"MLPIT classification: {artifacts.diagnostics.classification.value}"
          f" over {artifacts.observation_count} observations")
    if args.out_dir is not None:
        print(f"artifacts written to {args.out_dir}")
    return EXIT_OK


def _cmd_report(args) -> int:
    payload = {}
    for key, fname in (("mlpit", "mlpit.csv"), ("pit_finest", "pit_finest.csv")):
        path = args.dir / fname
        if not path.exists():
            raise ConfigError(f"missing {path}")
        hist = read_histogram_csv(path)
        diag = diagnose(hist)
        payload[key] = {
            "counts": [int(c) for c in hist.counts],
            "bins": hist.bins,
            "total": hist.total,
            "max_relative_deviation": diag.max_relative_deviation,
            "endpoint_ratio": diag.endpoint_ratio,
            "skew": diag.skew,
            "classification": diag.classification.value,
        }
        print(f"{key}: {diag.classification.value}")
    with open(args.dir / "diagnostics.json", "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_report(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MlmcForecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
