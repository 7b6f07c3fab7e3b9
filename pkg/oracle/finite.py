"""
Finite-sample truths: variances of the point estimators over the randomization
distribution of a fixed science table, biases of the variance estimators, and the
blocking versus complete-randomization comparison.
"""

import logging
import math
from typing import Sequence

import numpy as np

from estimators.report import check_applicable
from oracle.expectation import BlockMoments, expected_estimate, expected_pooled_ss, small_block_bias
from oracle.science import Design, Mechanism, ScienceTable
from utils.errors import EstimatorNotApplicable, ValidationError

logger = logging.getLogger(__name__)

CLOSED_FORM_IDS = ("cr", "big", "sb-equal", "sb-m", "sb-p")


def _check_weights(weights: np.ndarray) -> None:
    if not math.isclose(math.fsum(weights), 1.0, abs_tol=1e-9):
        raise ValidationError(f"block weights must sum to 1, got {math.fsum(weights)}")


def var_k_weighted(values: Sequence[float], weights: Sequence[float]) -> float:
    """sum_k w_k (x_k - sum_j w_j x_j)^2."""
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    _check_weights(w)
    center = math.fsum(w * x)
    return math.fsum(w * (x - center) ** 2)


def cov_k_weighted(x: Sequence[float], y: Sequence[float], weights: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    _check_weights(w)
    return math.fsum(w * (x - math.fsum(w * x)) * (y - math.fsum(w * y)))


def _require_complete_arms(design: Design) -> None:
    if design.n_t < 1 or design.n_c < 1:
        raise ValidationError(f"complete randomization needs both arms, got n_t={design.n_t}, n_c={design.n_c}")


def true_var_finite(science: ScienceTable, design: Design, mechanism: Mechanism | str = Mechanism.BLOCKED) -> float:
    """
    Variance of the matching point estimator over all assignments.

    complete: S2_c/n_c + S2_t/n_t - S2_tc/n with the design's arm totals.
    blocked:  sum_k (n_k/n)^2 (S2_tk/n_tk + S2_ck/n_ck - S2_tck/n_k).
    """
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.COMPLETE:
        if design.n != science.n:
            raise ValidationError(f"design has {design.n} units but the science table has {science.n}")
        _require_complete_arms(design)
        return science.s2("c") / design.n_c + science.s2("t") / design.n_t - science.s2_tc / science.n
    return BlockMoments.finite(science, design).true_variance


def bias_finite(science: ScienceTable, design: Design, estimator_id: str) -> float:
    """
    E[v_hat] - true variance over the randomization distribution.

    "cr" is the classic Neyman bias S2_tc/n under complete randomization with the
    design's totals; every other id is evaluated under blocked randomization.
    """
    if estimator_id == "cr":
        if design.n != science.n:
            raise ValidationError(f"design has {design.n} units but the science table has {science.n}")
        if design.n_t < 2 or design.n_c < 2:
            raise EstimatorNotApplicable(f"insufficient units in arm: n_t={design.n_t}, n_c={design.n_c}")
        return science.s2_tc / science.n
    design.check_matches(science)
    check_applicable(estimator_id, design.labels, design.n_k, design.n_tk)
    if estimator_id == "big":
        return math.fsum(science.n_k * science.block_s2_tc) / science.n ** 2
    if estimator_id in ("sb-equal", "sb-m", "sb-p"):
        return small_block_bias(estimator_id, design.n_k, science.tau_k)
    moments = BlockMoments.finite(science, design)
    return expected_estimate(moments, estimator_id) - moments.true_variance


def _unit_contrast(science: ScienceTable, p: float) -> np.ndarray:
    return math.sqrt(p / (1 - p)) * science.y0 + math.sqrt((1 - p) / p) * science.y1


def _require_equal_proportions(design: Design, what: str) -> None:
    if not design.p_k_equal:
        raise ValidationError(
            f"{what} needs one treated proportion in every block, got {[str(p) for p in design.p_k]}; "
            f"use compare_designs_unequal under the stratified framework or subtract true_var_finite values"
        )


def comparison_terms_finite(science: ScienceTable, design: Design) -> dict[str, float]:
    """
    Between- and within-block terms of var(tau_hat_cr) - var(tau_hat_blk).

    With x_i = sqrt(p/(1-p)) y_i(0) + sqrt((1-p)/p) y_i(1) and block means X_k:
    between = Var_k(X_k)/(n-1), within = -sum_k (n - n_k) S2_Xk / (n^2 (n-1)).
    """
    design.check_matches(science)
    _require_equal_proportions(design, "compare_designs_finite")
    n = science.n
    x = _unit_contrast(science, float(design.p))
    block_means = np.array([math.fsum(x[science.codes == k]) / science.n_k[k] for k in range(science.K)])
    between = var_k_weighted(block_means, science.weights) / (n - 1)
    within = 0.0
    for k in range(science.K):
        dev = x[science.codes == k] - block_means[k]
        within -= (n - science.n_k[k]) * math.fsum(dev * dev) / ((science.n_k[k] - 1) * n ** 2 * (n - 1))
    return {"between": between, "within": within}


def compare_designs_finite(science: ScienceTable, design: Design) -> float:
    terms = comparison_terms_finite(science, design)
    return terms["between"] + terms["within"]


def expected_s2_blocked(science: ScienceTable, design: Design, arm: str) -> float:
    """E[s2_z] of the pooled arm sample variance over blocked assignments."""
    moments = BlockMoments.finite(science, design)
    if arm == "t":
        counts, mean, var_mean, e_s2 = moments.n_tk, moments.mean_t, moments.var_mean_t, moments.e_s2_t
    elif arm == "c":
        counts, mean, var_mean, e_s2 = moments.n_ck, moments.mean_c, moments.var_mean_c, moments.e_s2_c
    else:
        raise ValueError(f"arm must be 't' or 'c', got {arm!r}")
    total = int(counts.sum())
    if total < 2:
        raise EstimatorNotApplicable(f"insufficient units in arm: {total}")
    return expected_pooled_ss(counts, mean, var_mean, e_s2) / (total - 1)


def ignore_blocking_bias_finite(science: ScienceTable, design: Design) -> float:
    """
    E[var_neyman_cr | blocked assignment] - var(tau_hat_blk).

    With a common proportion p, E[s2_z] is
    (1/(n_z - 1)) [sum_k (p(n_k - 1) - n_k (1-p)/n) S2_zk + sum_k n_zk (Ybar_k(z) - Ybar(z))^2]
    with p replaced by 1 - p for the control arm.
    """
    design.check_matches(science)
    _require_equal_proportions(design, "ignore_blocking_bias")
    if design.n_t < 2 or design.n_c < 2:
        raise EstimatorNotApplicable(f"insufficient units in arm: n_t={design.n_t}, n_c={design.n_c}")
    n = science.n
    p = float(design.p)
    expected = 0.0
    for arm, share, n_z, counts in (("t", p, design.n_t, design.treated_counts),
                                    ("c", 1 - p, design.n_c, design.sizes - design.treated_counts)):
        block_s2 = science.block_s2(arm)
        dev = science.block_means(arm) - science.mean(arm)
        e_s2 = (math.fsum((share * (science.n_k - 1) - science.n_k * (1 - share) / n) * block_s2)
                + math.fsum(counts * dev ** 2)) / (n_z - 1)
        expected += e_s2 / n_z
    return expected - true_var_finite(science, design)
