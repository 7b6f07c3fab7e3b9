#!/usr/bin/env python3
"""
Relative-bias sweep over effect heterogeneity.

Runs the simulation config once per (rho, b) pair and writes one row per
(rho, b, estimator) to a CSV: realized effect spread, blocking R2, true variance,
mean variance estimate and relative bias with its Monte Carlo standard error.
"""

import argparse
import dataclasses
import os
import sys

from tabulate import tabulate

# Add parent directory to path to import config and project packages
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import DEFAULT_SIM_CONFIG, SWEEP_RESULTS_CSV, resolve_threads
from data_ingest.read_strata import load_simulation_config
from simulate.runner import run_sweep
from utils.io_utils import atomic_write_csv, write_success_marker


def parse_floats(s):
    """Parse '0,0.5,1' into [0.0, 0.5, 1.0]."""
    return [float(x) for x in s.split(",") if x.strip()]


def main():
    ap = argparse.ArgumentParser(description="Relative bias of variance estimators across (rho, b)")
    ap.add_argument("--config", default=DEFAULT_SIM_CONFIG, help="Simulation config JSON")
    ap.add_argument("--rho", default="0,0.5,1", help='Comma-separated correlations, e.g. "0,0.5,1"')
    ap.add_argument("--b", default="0,1,2,4", help='Comma-separated effect spreads, e.g. "0,1,2,4"')
    ap.add_argument("--reps", type=int, default=None, help="Override the config replication count")
    ap.add_argument("--threads", type=int, default=None, help="Worker threads (fallback: BLOCKVAR_THREADS)")
    ap.add_argument("--out", default=SWEEP_RESULTS_CSV, help="Output CSV path")
    args = ap.parse_args()

    cfg = load_simulation_config(args.config)
    if args.reps is not None:
        cfg = dataclasses.replace(cfg, reps=args.reps)
    rhos, bs = parse_floats(args.rho), parse_floats(args.b)
    if not rhos or not bs:
        print("ERROR: --rho and --b need at least one value each.")
        sys.exit(2)

    print("== Relative Bias Sweep ==")
    print(f"Config: {args.config}")
    print(f"rho: {rhos}")
    print(f"b: {bs}")
    print(f"Replications per scenario: {cfg.reps} ({cfg.mode})")

    df = run_sweep(cfg, rhos, bs, threads=resolve_threads(args.threads), progress=sys.stderr.isatty())
    atomic_write_csv(df, args.out)
    write_success_marker(args.out)

    print(tabulate(df, headers="keys", showindex=False, floatfmt=".4g"))
    print(f"\n✅ OK: wrote {len(df)} rows to {args.out}")
    sys.exit(0)


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print("\nInterrupted by user.")
        sys.exit(130)
    except Exception as e:
        print(f"ERROR: Unexpected error: {e}")
        sys.exit(1)
