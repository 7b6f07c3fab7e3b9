#!/usr/bin/env python3
"""
Developer Sanity Check: Oracle vs Exhaustive Enumeration

Draws small random science tables, enumerates every assignment, and checks that the
enumerated mean of each variance estimator minus the exact variance of the point
estimator equals the oracle bias. Also checks that both point estimators are unbiased.
Exit non-zero on any mismatch for CI/CD integration.
"""

import argparse
import math
import os
import sys

import numpy as np

# Add parent directory to path to import config and project packages
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import DEFAULT_SEED, ESTIMATOR_IDS
from oracle.finite import bias_finite
from oracle.science import Design, Mechanism
from simulate.dgp import random_science
from simulate.study import monte_carlo_study
from utils.errors import EstimatorNotApplicable

# Block size patterns; half of each block is treated (rounded down)
SIZE_PATTERNS = (
    (2, 2, 2, 2),
    (2, 2, 3, 3),
    (3, 3, 3, 3),
    (4, 4, 2, 2),
    (4, 5, 2, 2, 3, 3),
    (4, 4, 4),
    (5, 6, 4),
)


def reconcile_table(science, design, estimator_ids, rtol):
    """Return (checked, failures) for one science table."""
    checked, failures = 0, []
    blocked = [e for e in estimator_ids if e != "cr"]
    runs = []
    if blocked:
        try:
            runs.append(monte_carlo_study(science, design, blocked, 0, 0, mode="exhaustive"))
        except EstimatorNotApplicable:
            pass
    if "cr" in estimator_ids and design.n_t >= 2 and design.n_c >= 2:
        runs.append(monte_carlo_study(science, design, ["cr"], 0, 0, mode="exhaustive",
                                      mechanism=Mechanism.COMPLETE))

    for result in runs:
        for est in result.estimators:
            expected = bias_finite(science, design, est.estimator_id)
            tol = rtol * max(1.0, abs(result.true_var), abs(est.mean_vhat))
            checked += 1
            if not math.isclose(est.bias, expected, rel_tol=0, abs_tol=tol):
                failures.append(f"{est.estimator_id}: enumerated bias {est.bias:.12g} vs oracle {expected:.12g}")
            if not math.isclose(est.mean_tau, science.tau, rel_tol=0, abs_tol=tol):
                failures.append(f"{est.estimator_id}: mean point estimate {est.mean_tau:.12g} vs tau {science.tau:.12g}")
            if not math.isclose(est.var_tau, result.true_var, rel_tol=0, abs_tol=tol):
                failures.append(
                    f"{est.estimator_id}: enumerated variance {est.var_tau:.12g} vs oracle {result.true_var:.12g}"
                )
    return checked, failures


def main():
    """Run oracle reconciliation sanity check."""
    ap = argparse.ArgumentParser(description="Dev sanity check: oracle biases vs exhaustive enumeration")
    ap.add_argument("--tables", type=int, default=20, help="Random science tables to check")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed for the random tables")
    ap.add_argument("--rtol", type=float, default=1e-9, help="Tolerance relative to the variance scale")
    ap.add_argument("--estimators", default=",".join(ESTIMATOR_IDS), help="Comma-separated estimator ids")
    args = ap.parse_args()

    estimator_ids = [e.strip() for e in args.estimators.split(",") if e.strip()]
    unknown = [e for e in estimator_ids if e not in ESTIMATOR_IDS]
    if unknown:
        print(f"ERROR: unknown estimator(s): {unknown}")
        sys.exit(2)

    print("== Oracle Reconciliation Sanity Check ==")
    print(f"Tables: {args.tables}")
    print(f"Seed: {args.seed}")
    print(f"Estimators: {', '.join(estimator_ids)}")

    rng = np.random.default_rng(args.seed)
    checked = 0
    failures = []
    for i in range(args.tables):
        sizes = SIZE_PATTERNS[i % len(SIZE_PATTERNS)]
        science = random_science(rng, sizes)
        design = Design.from_science(science, treated={b: s // 2 for b, s in zip(science.labels, science.n_k)})
        n_checked, table_failures = reconcile_table(science, design, estimator_ids, args.rtol)
        checked += n_checked
        failures.extend(f"table {i} sizes={sizes}: {f}" for f in table_failures)

    print("\n" + "=" * 50)
    print("SANITY REPORT")
    print("=" * 50)
    print(f"Tables checked: {args.tables}")
    print(f"Estimator checks: {checked}")
    print(f"Mismatches: {len(failures)}")
    for line in failures[:10]:
        print(f"  {line}")
    if len(failures) > 10:
        print("  ...")

    if checked == 0:
        print("\nERROR: no estimator applied to any table.")
        sys.exit(3)
    if failures:
        sys.exit(1)

    print("\n✅ OK: oracle biases match exhaustive enumeration.")
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
