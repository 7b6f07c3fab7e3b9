"""
Variance estimators for blocked, matched-pairs and hybrid experiments.

Every estimator exists twice:
- a kernel `*_kernel(arr)` over BlockArrays, vectorized over any leading batch axes
  (the simulators pass a whole chunk of assignments);
- a public function over an ExperimentSummary returning a float.

Applicability depends only on block sizes and treated counts, so the `check_*`
helpers are shared with the oracle module.
"""

import logging
from typing import Mapping

import numpy as np

from data_transform.summarize import BlockArrays, ExperimentSummary
from estimators.point import pooled_arm_stats
from estimators.weights import sbp_weights
from utils.errors import EstimatorNotApplicable

logger = logging.getLogger(__name__)


# --- applicability checks (sizes and counts only) ---

def _big_mask(n_k, n_tk) -> np.ndarray:
    n_k = np.asarray(n_k)
    n_tk = np.asarray(n_tk)
    return (n_tk >= 2) & (n_k - n_tk >= 2)


def check_all_big(labels, n_k, n_tk, name: str = "var_big_blocks") -> None:
    big = _big_mask(n_k, n_tk)
    if not big.all():
        small = [labels[i] for i in np.flatnonzero(~big)]
        raise EstimatorNotApplicable(
            f"{name} needs at least two treated and two control units per block; "
            f"small blocks {small} present, use var_hybrid"
        )


def check_small_only(labels, n_k, n_tk, name: str) -> None:
    big = _big_mask(n_k, n_tk)
    if big.any():
        raise EstimatorNotApplicable(
            f"{name} covers small blocks only; big blocks {[labels[i] for i in np.flatnonzero(big)]} "
            f"present, use var_hybrid"
        )


def check_equal_sizes(labels, n_k, n_tk) -> None:
    check_small_only(labels, n_k, n_tk, "var_small_equal")
    if len(labels) < 2:
        raise EstimatorNotApplicable("var_small_equal needs at least two blocks")
    if len(set(int(s) for s in n_k)) != 1:
        raise EstimatorNotApplicable(
            f"var_small_equal needs blocks of one size, got sizes {sorted(set(int(s) for s in n_k))}; "
            f"use var_small_stratified or var_small_unified"
        )


def check_size_groups(labels, n_k, n_tk) -> None:
    """Size groups are formed over small blocks; each needs two blocks."""
    n_k = np.asarray(n_k)
    small = ~_big_mask(n_k, n_tk)
    if not small.any():
        raise EstimatorNotApplicable("size group too small: no small blocks, use var_big_blocks")
    sizes, counts = np.unique(n_k[small], return_counts=True)
    for m, count in zip(sizes, counts):
        if count < 2:
            raise EstimatorNotApplicable(f"size group too small: {int(m)}")
    check_small_only(labels, n_k, n_tk, "var_small_stratified")


def check_at_least_two_blocks(labels, name: str) -> None:
    if len(labels) < 2:
        raise EstimatorNotApplicable(f"{name} needs at least two blocks")


def check_plug_in(labels, n_k, n_tk) -> None:
    n_k = np.asarray(n_k)
    n_tk = np.asarray(n_tk)
    big = _big_mask(n_k, n_tk)
    if not big.any():
        raise EstimatorNotApplicable("no donor blocks for plug-in")
    both = (n_tk < 2) & (n_k - n_tk < 2)
    if both.any():
        raise EstimatorNotApplicable(
            f"plug-in imputes one arm per block; blocks {[labels[i] for i in np.flatnonzero(both)]} "
            f"have two singleton arms"
        )


# --- helpers ---

def _dispersion(tau_hat: np.ndarray, a: np.ndarray, center_weights: np.ndarray) -> np.ndarray:
    """sum_k a_k (tau_hat_k - sum_j c_j tau_hat_j)^2 over the last axis."""
    center = np.sum(tau_hat * center_weights, axis=-1, keepdims=True)
    return np.sum(a * (tau_hat - center) ** 2, axis=-1)


def _neyman_terms(arr: BlockArrays, s2_t=None, s2_c=None) -> np.ndarray:
    s2_t = arr.s2_t if s2_t is None else s2_t
    s2_c = arr.s2_c if s2_c is None else s2_c
    return s2_c / arr.n_ck + s2_t / arr.n_tk


# --- kernels ---

def neyman_cr_kernel(arr: BlockArrays) -> np.ndarray:
    n_t, n_c = arr.n_t, arr.n_c
    if n_t < 2 or n_c < 2:
        raise EstimatorNotApplicable(f"insufficient units in arm: n_t={n_t}, n_c={n_c}")
    _, _, ss_t, ss_c = pooled_arm_stats(arr)
    return ss_c / (n_c - 1) / n_c + ss_t / (n_t - 1) / n_t


def big_blocks_kernel(arr: BlockArrays) -> np.ndarray:
    check_all_big(arr.labels, arr.n_k, arr.n_tk)
    return np.sum(arr.weights ** 2 * _neyman_terms(arr), axis=-1)


def small_equal_kernel(arr: BlockArrays) -> np.ndarray:
    check_equal_sizes(arr.labels, arr.n_k, arr.n_tk)
    K = arr.K
    equal = np.full(K, 1.0 / K)
    return _dispersion(arr.tau_hat, np.full(K, 1.0 / (K * (K - 1))), equal)


def small_stratified_kernel(arr: BlockArrays) -> np.ndarray:
    check_size_groups(arr.labels, arr.n_k, arr.n_tk)
    N = arr.n
    total = np.zeros(arr.batch_shape)
    for m in np.unique(arr.n_k):
        mask = arr.n_k == m
        K_j = int(mask.sum())
        N_j = int(m) * K_j
        tau_j = arr.tau_hat[..., mask]
        var_j = _dispersion(tau_j, np.full(K_j, 1.0 / (K_j * (K_j - 1))), np.full(K_j, 1.0 / K_j))
        total = total + (N_j / N) ** 2 * var_j
    return total


def small_unified_kernel(arr: BlockArrays) -> np.ndarray:
    check_small_only(arr.labels, arr.n_k, arr.n_tk, "var_small_unified")
    weights = sbp_weights(arr.n_k)
    return _dispersion(arr.tau_hat, weights.a_k, arr.weights)


_SMALL_METHODS = {
    "unified": small_unified_kernel,
    "stratified": small_stratified_kernel,
}


def hybrid_kernel(arr: BlockArrays, small_method: str) -> np.ndarray:
    try:
        small_kernel = _SMALL_METHODS[small_method]
    except KeyError:
        raise ValueError(f"small_method must be one of {sorted(_SMALL_METHODS)}, got {small_method!r}")
    big = arr.big
    if big.all():
        return big_blocks_kernel(arr)
    if not big.any():
        return small_kernel(arr)
    big_part = arr.subset(big)
    small_part = arr.subset(~big)
    n = arr.n
    n_small = small_part.n
    return ((n - n_small) / n) ** 2 * big_blocks_kernel(big_part) + (n_small / n) ** 2 * small_kernel(small_part)


def srs_kernel(arr: BlockArrays) -> np.ndarray:
    check_all_big(arr.labels, arr.n_k, arr.n_tk, name="var_srs_unbiased")
    n = arr.n
    n_k = arr.n_k
    within = np.sum(n_k * (n_k - 1) / (n * (n - 1)) * _neyman_terms(arr), axis=-1)
    between = _dispersion(arr.tau_hat, n_k / (n * (n - 1)), arr.weights)
    return within + between


def rct_yes_kernel(arr: BlockArrays, variant: str) -> np.ndarray:
    check_at_least_two_blocks(arr.labels, "var_rct_yes")
    K, n = arr.K, arr.n
    prefactor = 1.0 / (K * (K - 1) * (n / K) ** 2)
    tau_blk = np.sum(arr.tau_hat * arr.weights, axis=-1, keepdims=True)
    if variant == "v1":
        return prefactor * np.sum((arr.n_k * arr.tau_hat - (n / K) * tau_blk) ** 2, axis=-1)
    if variant == "v2":
        return prefactor * np.sum(arr.n_k ** 2 * (arr.tau_hat - tau_blk) ** 2, axis=-1)
    raise ValueError(f"variant must be 'v1' or 'v2', got {variant!r}")


def plug_in_kernel(arr: BlockArrays) -> np.ndarray:
    check_plug_in(arr.labels, arr.n_k, arr.n_tk)
    big = arr.big
    donor_w = arr.n_k[big] / arr.n_k[big].sum()
    s2_t, s2_c = arr.s2_t, arr.s2_c
    imputed_t = np.sum(s2_t[..., big] * donor_w, axis=-1, keepdims=True)
    imputed_c = np.sum(s2_c[..., big] * donor_w, axis=-1, keepdims=True)
    s2_t = np.where(arr.n_tk >= 2, s2_t, imputed_t)
    s2_c = np.where(arr.n_ck >= 2, s2_c, imputed_c)
    return np.sum(arr.weights ** 2 * _neyman_terms(arr, s2_t, s2_c), axis=-1)


def small_grouped_kernel(arr: BlockArrays, group_codes: np.ndarray) -> np.ndarray:
    group_codes = np.asarray(group_codes)
    n = arr.n
    total = np.zeros(arr.batch_shape)
    for g in np.unique(group_codes):
        part = arr.subset(group_codes == g)
        total = total + (part.n / n) ** 2 * small_unified_kernel(part)
    return total


# --- public API over summaries ---

def var_neyman_cr(table) -> float:
    """Classic complete-randomization estimator s2_c/n_c + s2_t/n_t, ignoring blocks."""
    from estimators.point import pooled_arrays

    return float(neyman_cr_kernel(pooled_arrays(table)))


def var_big_blocks(summary: ExperimentSummary) -> float:
    return float(big_blocks_kernel(summary.arrays))


def var_small_equal(summary: ExperimentSummary) -> float:
    return float(small_equal_kernel(summary.arrays))


def var_small_stratified(summary: ExperimentSummary) -> float:
    return float(small_stratified_kernel(summary.arrays))


def var_small_unified(summary: ExperimentSummary) -> float:
    return float(small_unified_kernel(summary.arrays))


def var_hybrid(summary: ExperimentSummary, small_method: str = "unified") -> float:
    """
    ((n - n_small)/n)^2 * v_big + (n_small/n)^2 * v_small.

    The small-block method sees only the small blocks, so its weights and the
    half-size guard use n_small. With no big (or no small) blocks the other
    component is returned alone.
    """
    arr = summary.arrays
    if arr.big.all():
        logger.warning("No small blocks; hybrid estimator reduces to the big-block estimator")
    elif not arr.big.any():
        logger.warning("No big blocks; hybrid estimator reduces to the small-block estimator")
    return float(hybrid_kernel(arr, small_method))


def var_srs_unbiased(summary: ExperimentSummary) -> float:
    return float(srs_kernel(summary.arrays))


def var_rct_yes(summary: ExperimentSummary, variant: str = "v1") -> float:
    return float(rct_yes_kernel(summary.arrays, variant))


def var_plug_in(summary: ExperimentSummary) -> float:
    return float(plug_in_kernel(summary.arrays))


def var_small_grouped(summary: ExperimentSummary, groups: Mapping[str, str]) -> float:
    """Unified estimator within each user-supplied group of blocks, combined by group size."""
    arr = summary.arrays
    missing = [label for label in arr.labels if label not in groups]
    if missing:
        raise EstimatorNotApplicable(f"blocks {missing} have no group")
    names = sorted({str(groups[label]) for label in arr.labels})
    index = {name: i for i, name in enumerate(names)}
    codes = np.array([index[str(groups[label])] for label in arr.labels])
    return float(small_grouped_kernel(arr, codes))
