"""
Point estimators: the blocked estimator (size-weighted block differences in means)
and the complete-randomization estimator (grand difference in means).
"""

import numpy as np

from data_ingest.records import ExperimentTable
from data_transform.summarize import BlockArrays, ExperimentSummary, block_arrays
from utils.errors import ValidationError


def tau_blk_kernel(arr: BlockArrays) -> np.ndarray:
    return np.sum(arr.weights * arr.tau_hat, axis=-1)


def pooled_arm_stats(arr: BlockArrays):
    """Grand arm means and within-arm sums of squares, pooled over blocks."""
    n_t, n_c = arr.n_t, arr.n_c
    mean_t = np.sum(arr.n_tk * arr.mean_t, axis=-1) / n_t
    mean_c = np.sum(arr.n_ck * arr.mean_c, axis=-1) / n_c
    ss_t = np.sum(arr.ss_t, axis=-1) + np.sum(arr.n_tk * (arr.mean_t - mean_t[..., None]) ** 2, axis=-1)
    ss_c = np.sum(arr.ss_c, axis=-1) + np.sum(arr.n_ck * (arr.mean_c - mean_c[..., None]) ** 2, axis=-1)
    return mean_t, mean_c, ss_t, ss_c


def tau_cr_kernel(arr: BlockArrays) -> np.ndarray:
    mean_t, mean_c, _, _ = pooled_arm_stats(arr)
    return mean_t - mean_c


def pooled_arrays(table: ExperimentTable | ExperimentSummary) -> BlockArrays:
    """The whole experiment as one block."""
    if isinstance(table, ExperimentSummary):
        arr = table.arrays
        mean_t, mean_c, ss_t, ss_c = pooled_arm_stats(arr)
        return BlockArrays(("all",), np.array([arr.n]), np.array([arr.n_t]),
                           mean_t[..., None], mean_c[..., None], ss_t[..., None], ss_c[..., None])
    treated = table.treated
    n, n_t = len(treated), int(treated.sum())
    if n_t == 0 or n_t == n:
        raise ValidationError(f"empty arm overall: {n_t} treated of {n} units")
    return block_arrays(table.y_obs, treated, np.zeros(n, dtype=np.int64), [n], [n_t], ("all",))


def tau_hat_blk(summary: ExperimentSummary) -> float:
    return float(tau_blk_kernel(summary.arrays))


def tau_hat_cr(table: ExperimentTable | ExperimentSummary) -> float:
    return float(tau_cr_kernel(pooled_arrays(table)))
