"""
Estimator registry and per-estimator reports.

The ids in ESTIMATOR_IDS are the single user-facing vocabulary; each maps to a
vectorized kernel and the point estimator it accompanies.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from scipy.stats import norm

from config import ESTIMATOR_IDS
from data_transform.summarize import BlockArrays, ExperimentSummary
from estimators import variance as v
from estimators.point import tau_blk_kernel, tau_cr_kernel
from utils.errors import EstimatorNotApplicable, ValidationError

logger = logging.getLogger(__name__)

CONSERVATIVE_NOTE = "conservative unless block average treatment effects are homogeneous"
IGNORES_BLOCKING_NOTE = "ignores blocking; may be anti-conservative for a blocked design"


@dataclass(frozen=True)
class EstimatorSpec:
    estimator_id: str
    kernel: Callable[[BlockArrays], np.ndarray]
    point: Callable[[BlockArrays], np.ndarray]
    label: str


REGISTRY: dict[str, EstimatorSpec] = {
    spec.estimator_id: spec
    for spec in (
        EstimatorSpec("cr", v.neyman_cr_kernel, tau_cr_kernel, "Neyman, complete randomization"),
        EstimatorSpec("big", v.big_blocks_kernel, tau_blk_kernel, "big blocks"),
        EstimatorSpec("sb-equal", v.small_equal_kernel, tau_blk_kernel, "small blocks, equal sizes"),
        EstimatorSpec("sb-m", v.small_stratified_kernel, tau_blk_kernel, "small blocks, stratified by size"),
        EstimatorSpec("sb-p", v.small_unified_kernel, tau_blk_kernel, "small blocks, unified weights"),
        EstimatorSpec("hybrid-m", partial(v.hybrid_kernel, small_method="stratified"), tau_blk_kernel,
                      "hybrid, stratified small blocks"),
        EstimatorSpec("hybrid-p", partial(v.hybrid_kernel, small_method="unified"), tau_blk_kernel,
                      "hybrid, unified small blocks"),
        EstimatorSpec("srs", v.srs_kernel, tau_blk_kernel, "unbiased under simple random sampling"),
        EstimatorSpec("rct-yes", partial(v.rct_yes_kernel, variant="v1"), tau_blk_kernel, "RCT-YES, size weights"),
        EstimatorSpec("rct-yes2", partial(v.rct_yes_kernel, variant="v2"), tau_blk_kernel,
                      "RCT-YES, survey weights"),
        EstimatorSpec("plugin", v.plug_in_kernel, tau_blk_kernel, "plug-in from big-block variances"),
    )
}
assert tuple(REGISTRY) == ESTIMATOR_IDS


def get_spec(estimator_id: str) -> EstimatorSpec:
    try:
        return REGISTRY[estimator_id]
    except KeyError:
        raise ValidationError(f"unknown estimator {estimator_id!r}; choose from {', '.join(ESTIMATOR_IDS)}")


def check_applicable(estimator_id: str, labels, n_k, n_tk) -> None:
    """Raise EstimatorNotApplicable if the estimator is undefined for these block counts."""
    get_spec(estimator_id).kernel(BlockArrays.placeholder(labels, n_k, n_tk))


@dataclass(frozen=True)
class EstimateReport:
    estimator_id: str
    estimate: float
    variance_estimate: float | None
    se: float | None
    per_block: tuple[tuple[str, float, float], ...] = ()
    warnings: tuple[str, ...] = ()
    ci: tuple[float, float] | None = None
    ci_level: float | None = None

    def to_dict(self) -> dict:
        out = {
            "estimate": self.estimate,
            "variance": self.variance_estimate,
            "se": self.se,
            "warnings": list(self.warnings),
        }
        if self.ci is not None:
            out["ci"] = list(self.ci)
            out["ci_level"] = self.ci_level
        return out


def _notes(estimator_id: str, arr: BlockArrays) -> list[str]:
    big = arr.big
    notes = []
    if estimator_id == "cr" and arr.K > 1:
        notes.append(IGNORES_BLOCKING_NOTE)
    elif estimator_id in ("sb-equal", "sb-m", "sb-p", "rct-yes", "rct-yes2"):
        notes.append(CONSERVATIVE_NOTE)
    elif estimator_id in ("hybrid-m", "hybrid-p"):
        if big.all():
            notes.append("no small blocks; hybrid reduces to the big-block estimator")
        elif not big.any():
            notes.append("no big blocks; hybrid reduces to the small-block estimator")
            notes.append(CONSERVATIVE_NOTE)
        else:
            notes.append(CONSERVATIVE_NOTE)
    elif estimator_id == "plugin":
        imputed = int(np.sum(arr.n_tk < 2) + np.sum(arr.n_ck < 2))
        if imputed:
            notes.append(f"imputed {imputed} arm variance(s) from {int(big.sum())} big block(s)")
    return notes


def normal_interval(estimate: float, se: float, level: float) -> tuple[float, float]:
    if not 0 < level < 1:
        raise ValidationError(f"confidence level must be in (0, 1), got {level}")
    z = norm.ppf(0.5 + level / 2)
    return estimate - z * se, estimate + z * se


def estimate(summary: ExperimentSummary, estimator_id: str, ci_level: float | None = None) -> EstimateReport:
    spec = get_spec(estimator_id)
    arr = summary.arrays
    variance = float(spec.kernel(arr))
    point = float(spec.point(arr))
    se = math.sqrt(variance)
    if estimator_id == "cr":
        per_block = ()
    else:
        per_block = tuple(
            (label, float(w), float(w * t)) for label, w, t in zip(arr.labels, arr.weights, arr.tau_hat)
        )
    notes = _notes(estimator_id, arr)
    for note in notes:
        logger.debug(f"{estimator_id}: {note}")
    ci = normal_interval(point, se, ci_level) if ci_level is not None else None
    return EstimateReport(estimator_id, point, variance, se, per_block, tuple(notes), ci, ci_level)


def estimate_many(summary: ExperimentSummary, estimator_ids, ci_level: float | None = None):
    """Reports for each id; inapplicable estimators come back as error strings."""
    results: dict[str, EstimateReport | str] = {}
    for estimator_id in estimator_ids:
        try:
            results[estimator_id] = estimate(summary, estimator_id, ci_level)
        except EstimatorNotApplicable as e:
            logger.warning(f"Estimator {estimator_id} not applicable: {e}")
            results[estimator_id] = str(e)
    return results
