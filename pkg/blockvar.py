#!/usr/bin/env python3
"""
Command-line entry point for blockvar.

  analyze   variance estimates for an observed blocked experiment
  simulate  Monte Carlo / exhaustive studies from a JSON config, results CSV
  compare   blocking versus complete randomization from a science table or strata file

Reports go to stdout; logs and progress bars go to stderr.
Exit codes: 0 success, 1 I/O error, 2 validation error, 3 every estimator failed.
"""

import argparse
import dataclasses
import logging
import math
import os
import sys

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from tabulate import tabulate

from config import ESTIMATOR_IDS, LOG_FORMAT, LOG_LEVEL, SIM_RESULTS_CSV, resolve_threads
from utils.errors import BlockvarError, EstimatorNotApplicable, ValidationError
from utils.io_utils import dumps_report, to_jsonable

logger = logging.getLogger("blockvar")

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_ALL_FAILED = 3
EXIT_INTERRUPTED = 130


def setup_logging(level: str, log_file: str | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def _progress_enabled(args) -> bool:
    return not args.quiet and sys.stderr.isatty()


def _estimator_list(raw: str) -> list[str]:
    ids = [e.strip() for e in raw.split(",") if e.strip()]
    if not ids:
        raise argparse.ArgumentTypeError("at least one estimator is required")
    unknown = [e for e in ids if e not in ESTIMATOR_IDS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown estimator(s) {unknown}; choose from {', '.join(ESTIMATOR_IDS)}")
    return ids


# --- analyze ---

def cmd_analyze(args) -> int:
    from data_ingest.read_experiment import read_experiment_file
    from data_transform.summarize import summarize
    from estimators.point import tau_hat_blk
    from estimators.report import estimate_many

    summary = summarize(read_experiment_file(args.input))
    results = estimate_many(summary, args.estimator, args.ci)
    per_estimator = {
        e: (r.to_dict() if not isinstance(r, str) else {"error": r}) for e, r in results.items()
    }
    report = {
        "estimate": tau_hat_blk(summary),
        "per_estimator": per_estimator,
        "block_table": summary.to_frame().to_dict(orient="records"),
    }

    if args.format == "text":
        print(render_analysis_text(report))
    else:
        sys.stdout.write(dumps_report(report))

    if all("error" in v for v in per_estimator.values()):
        logger.error("No requested estimator applies to this experiment")
        return EXIT_ALL_FAILED
    return EXIT_OK


def render_analysis_text(report: dict) -> str:
    report = to_jsonable(report)
    blocks = tabulate(report["block_table"], headers="keys", floatfmt=".6g", missingval="-")
    rows = []
    for estimator_id, entry in report["per_estimator"].items():
        if "error" in entry:
            rows.append([estimator_id, None, None, None, f"error: {entry['error']}"])
            continue
        ci = entry.get("ci")
        ci_text = f"[{ci[0]:.6g}, {ci[1]:.6g}]" if ci else None
        rows.append([estimator_id, entry["variance"], entry["se"], ci_text, "; ".join(entry["warnings"])])
    estimators = tabulate(rows, headers=["estimator", "variance", "se", "ci", "notes"], floatfmt=".6g",
                          missingval="-")
    return f"estimate (blocked): {report['estimate']:.12g}\n\n{blocks}\n\n{estimators}"


# --- simulate ---

def cmd_simulate(args) -> int:
    from data_ingest.read_strata import load_simulation_config
    from simulate.runner import run_simulation, write_results

    cfg = load_simulation_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.reps is not None:
        if args.reps < 2:
            raise ValidationError(f"--reps must be at least 2, got {args.reps}")
        cfg = dataclasses.replace(cfg, reps=args.reps)
    try:
        threads = resolve_threads(args.threads)
    except ValueError as e:
        raise ValidationError(str(e)) from e

    result = run_simulation(cfg, threads=threads, progress=_progress_enabled(args))
    write_results(result, args.out, success_marker=not args.no_success_marker)
    for estimator_id, reason in result.skipped.items():
        logger.warning(f"Estimator {estimator_id} skipped: {reason}")
    if not args.quiet:
        print(tabulate(result.to_frame(), headers="keys", showindex=False, floatfmt=".6g"))
    return EXIT_OK


# --- compare ---

def _compare_finite(args) -> dict:
    from data_ingest.read_experiment import read_design_file, read_science_file
    from oracle import finite
    from oracle.science import Design, Mechanism

    if args.science is None or args.strata is not None:
        raise ValidationError("the finite framework needs --science and no --strata")
    if args.p_cr is not None:
        raise ValidationError("--p-cr applies to the m1 framework only")
    if (args.p is None) == (args.design is None):
        raise ValidationError("the finite framework needs exactly one of --p or --design")
    science = read_science_file(args.science)
    if args.p is not None:
        design = Design.from_science(science, p=args.p)
    else:
        design = Design.from_science(science, treated=read_design_file(args.design))

    warnings = []
    var_cr = finite.true_var_finite(science, design, Mechanism.COMPLETE)
    var_blk = finite.true_var_finite(science, design, Mechanism.BLOCKED)
    decomposition = None
    ignore_bias = None
    if design.p_k_equal:
        decomposition = finite.comparison_terms_finite(science, design)
        difference = decomposition["between"] + decomposition["within"]
        try:
            ignore_bias = finite.ignore_blocking_bias_finite(science, design)
        except EstimatorNotApplicable as e:
            warnings.append(f"ignore_blocking_bias unavailable: {e}")
    else:
        difference = var_cr - var_blk
        warnings.append("unequal treated proportions; difference computed directly")
    return {
        "framework": "finite",
        "var_cr": var_cr,
        "var_blk": var_blk,
        "difference": difference,
        "decomposition": decomposition,
        "ignore_blocking_bias": ignore_bias,
        "blocking_never_worse": False,
        "warnings": warnings,
    }


def _compare_m1(args) -> dict:
    from data_ingest.read_strata import load_strata_json
    from oracle import population

    if args.strata is None or args.science is not None:
        raise ValidationError("the m1 framework needs --strata and no --science")
    if args.p is not None or args.design is not None:
        raise ValidationError("--p and --design apply to the finite framework only; strata carry n_tk")
    pop, design = load_strata_json(args.strata)

    warnings = []
    p_cr = args.p_cr
    same_p = design.p_k_equal and (p_cr is None or math.isclose(p_cr, float(design.p)))
    terms = population.comparison_terms_m1(pop, design, p_cr)
    if not same_p:
        warnings.append("treated proportions differ from p_cr; blocking can increase variance")
    ignore_bias = None
    if design.p_k_equal:
        try:
            ignore_bias = population.ignore_blocking_bias_m1(pop, design)
        except EstimatorNotApplicable as e:
            warnings.append(f"ignore_blocking_bias unavailable: {e}")
    return {
        "framework": "m1",
        "var_cr": population.var_cr_m1(pop, design, p_cr),
        "var_blk": population.true_var_m1(pop, design),
        "difference": terms["between"] + terms["proportion_penalty"],
        "decomposition": terms,
        "ignore_blocking_bias": ignore_bias,
        "blocking_never_worse": same_p,
        "warnings": warnings,
    }


def cmd_compare(args) -> int:
    report = _compare_finite(args) if args.framework == "finite" else _compare_m1(args)
    sys.stdout.write(dumps_report(report))
    return EXIT_OK


# --- parser ---

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--log-file", default=None, help="Also write logs to this file")
    p.add_argument("--log-level", default=LOG_LEVEL, help="Logging level (default from BLOCKVAR_LOG_LEVEL)")
    p.add_argument("--quiet", action="store_true", help="Warnings only; no progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockvar", description="Variance estimation for blocked and matched-pairs experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="Estimate the treatment effect and its variance")
    a.add_argument("--input", required=True, help="Experiment CSV with header unit_id,block,z,y")
    a.add_argument("--estimator", required=True, type=_estimator_list,
                   help=f"Comma-separated estimator ids: {', '.join(ESTIMATOR_IDS)}")
    a.add_argument("--ci", type=float, default=None, help="Normal-approximation interval level, e.g. 0.95")
    a.add_argument("--format", choices=("json", "text"), default="json")
    _add_common(a)
    a.set_defaults(handler=cmd_analyze)

    s = sub.add_parser("simulate", help="Run a simulation study from a JSON config")
    s.add_argument("--config", required=True, help="Simulation config JSON")
    s.add_argument("--out", default=SIM_RESULTS_CSV, help="Results CSV path (default: outputs/sim_results.csv)")
    s.add_argument("--seed", type=int, default=None, help="Override the config seed")
    s.add_argument("--reps", type=int, default=None, help="Override the config replication count")
    s.add_argument("--threads", type=int, default=None, help="Worker threads (fallback: BLOCKVAR_THREADS)")
    s.add_argument("--no-success-marker", action="store_true", help="Do not write _SUCCESS")
    _add_common(s)
    s.set_defaults(handler=cmd_simulate)

    c = sub.add_parser("compare", help="Compare blocking with complete randomization")
    c.add_argument("--framework", choices=("finite", "m1"), required=True)
    c.add_argument("--science", default=None, help="Science CSV with header block,y0,y1 (finite)")
    c.add_argument("--strata", default=None, help="Strata population JSON (m1)")
    c.add_argument("--p", default=None, help="Common treated proportion, e.g. 0.5 or 1/3 (finite)")
    c.add_argument("--design", default=None, help="CSV block,n_t of treated counts (finite)")
    c.add_argument("--p-cr", type=float, default=None, help="Treated proportion under complete randomization (m1)")
    _add_common(c)
    c.set_defaults(handler=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = "WARNING" if args.quiet else str(args.log_level).upper()
    try:
        setup_logging(level, args.log_file)
        return args.handler(args)
    except ValidationError as e:
        logger.error(f"{e}")
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except BlockvarError as e:
        logger.error(f"{e}")
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
