"""
Monte Carlo and exhaustive randomization studies over a fixed science table.

Assignments are processed in fixed-size chunks; each chunk is evaluated with the
vectorized estimator kernels. Chunks may run on a thread pool, and results are
merged in chunk order, so output does not depend on the number of threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import CHUNK_SIZE, ENUMERATION_CAP, RESULTS_COLUMNS
from data_transform.summarize import block_arrays
from estimators.report import check_applicable, get_spec
from oracle.finite import true_var_finite
from oracle.science import Design, Mechanism, ScienceTable
from simulate.assignment import assignment_count, draw_assignment_matrix, iter_assignment_batches, replication_rng
from utils.errors import EstimatorNotApplicable, ValidationError

logger = logging.getLogger(__name__)

MODES = ("exhaustive", "sampled")


@dataclass(frozen=True)
class EstimatorSummary:
    estimator_id: str
    mean_tau: float
    var_tau: float
    mean_vhat: float
    var_vhat: float
    bias: float
    rel_bias: float
    mc_se: float            # standard error of mean_vhat
    bias_se: float          # standard error of mean_vhat - true variance
    n_valid: int

    @property
    def rel_bias_se(self) -> float:
        return self.bias_se / (self.mean_vhat - self.bias) if self.mean_vhat != self.bias else math.nan


@dataclass(frozen=True)
class MCResult:
    mode: str
    mechanism: str
    framework: str
    reps: int
    true_var: float
    true_var_se: float
    estimators: tuple[EstimatorSummary, ...]
    skipped: dict = field(default_factory=dict, compare=False)

    def get(self, estimator_id: str) -> EstimatorSummary:
        for est in self.estimators:
            if est.estimator_id == estimator_id:
                return est
        raise KeyError(estimator_id)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "estimator": e.estimator_id,
                "mean_tau": e.mean_tau,
                "var_tau": e.var_tau,
                "mean_vhat": e.mean_vhat,
                "rel_bias": e.rel_bias,
                "var_vhat": e.var_vhat,
                "mc_se": e.mc_se,
            }
            for e in self.estimators
        ]
        return pd.DataFrame(rows, columns=list(RESULTS_COLUMNS))


def run_chunks(fn: Callable, chunks: Sequence, threads: int, progress: bool, desc: str) -> list:
    """fn over chunks in order, optionally on a thread pool, with a tqdm bar on stderr."""
    bar = tqdm(total=len(chunks), desc=desc, unit="chunk", disable=not progress, leave=False)
    try:
        if threads <= 1:
            out = []
            for chunk in chunks:
                out.append(fn(chunk))
                bar.update(1)
            return out
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = []
            for result in pool.map(fn, chunks):
                out.append(result)
                bar.update(1)
            return out
    finally:
        bar.close()


def applicable_estimators(estimator_ids: Iterable[str], design: Design,
                          mechanism: Mechanism) -> tuple[list[str], dict[str, str]]:
    ok, skipped = [], {}
    for estimator_id in estimator_ids:
        get_spec(estimator_id)
        if mechanism is Mechanism.COMPLETE:
            if estimator_id != "cr":
                skipped[estimator_id] = "only the cr estimator applies under complete randomization"
            elif design.n_t < 2 or design.n_c < 2:
                skipped[estimator_id] = f"insufficient units in arm: n_t={design.n_t}, n_c={design.n_c}"
            else:
                ok.append(estimator_id)
            continue
        try:
            check_applicable(estimator_id, design.labels, design.n_k, design.n_tk)
            ok.append(estimator_id)
        except EstimatorNotApplicable as e:
            skipped[estimator_id] = str(e)
    for estimator_id, reason in skipped.items():
        logger.warning(f"Skipping estimator {estimator_id}: {reason}")
    return ok, skipped


def evaluate_assignments(science: ScienceTable, design: Design, mechanism: Mechanism,
                         estimator_ids: Sequence[str], T: np.ndarray) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(point estimates, variance estimates) per estimator for a batch of assignments T."""
    Y = np.where(T, science.y1, science.y0)
    if mechanism is Mechanism.COMPLETE:
        arr = block_arrays(Y, T, np.zeros(design.n, dtype=np.int64), [design.n], [design.n_t], ("all",))
    else:
        arr = block_arrays(Y, T, design.codes, design.n_k, design.n_tk, design.labels)
    out = {}
    for estimator_id in estimator_ids:
        spec = get_spec(estimator_id)
        out[estimator_id] = (np.broadcast_to(spec.point(arr), T.shape[:1]),
                             np.broadcast_to(spec.kernel(arr), T.shape[:1]))
    return out


def merge_chunks(results: list[dict], estimator_ids: Sequence[str]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {
        e: (np.concatenate([r[e][0] for r in results]), np.concatenate([r[e][1] for r in results]))
        for e in estimator_ids
    }


def summarize_estimator(estimator_id: str, tau: np.ndarray, vhat: np.ndarray, true_var: float,
                        exhaustive: bool) -> EstimatorSummary:
    R = len(vhat)
    ddof = 0 if exhaustive else 1
    mean_vhat = float(np.mean(vhat))
    mc_se = 0.0 if exhaustive else float(np.std(vhat, ddof=1) / math.sqrt(R))
    bias = mean_vhat - true_var
    return EstimatorSummary(
        estimator_id=estimator_id,
        mean_tau=float(np.mean(tau)),
        var_tau=float(np.var(tau, ddof=ddof)),
        mean_vhat=mean_vhat,
        var_vhat=float(np.var(vhat, ddof=ddof)),
        bias=bias,
        rel_bias=bias / true_var if true_var > 0 else math.nan,
        mc_se=mc_se,
        bias_se=mc_se,
        n_valid=R,
    )


def monte_carlo_study(
    science: ScienceTable,
    design: Design,
    estimator_ids: Sequence[str],
    reps: int,
    seed: int,
    mode: str = "sampled",
    mechanism: Mechanism | str = Mechanism.BLOCKED,
    threads: int = 1,
    cap: int = ENUMERATION_CAP,
    progress: bool = False,
) -> MCResult:
    """
    Estimator means and variances over the randomization distribution.

    exhaustive: every assignment once, equally weighted (reps is ignored).
    sampled:    `reps` assignments, replication r drawn from stream (seed, r).
    Relative bias is measured against the exact variance of the point estimator
    under the mechanism (blocked or complete).
    """
    mechanism = Mechanism(mechanism)
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    design.check_matches(science)
    ids, skipped = applicable_estimators(estimator_ids, design, mechanism)
    if not ids:
        raise EstimatorNotApplicable("no requested estimator applies to this design")
    true_var = true_var_finite(science, design, mechanism)

    def evaluate(T):
        return evaluate_assignments(science, design, mechanism, ids, T)

    if mode == "exhaustive":
        total = assignment_count(design, mechanism)
        logger.info(f"Enumerating {total} assignments ({mechanism.value})")
        chunks = list(iter_assignment_batches(design, mechanism, CHUNK_SIZE, cap))
        fn = evaluate
    else:
        if reps < 2:
            raise ValidationError(f"reps must be at least 2, got {reps}")
        total = reps
        logger.info(f"Sampling {reps} assignments ({mechanism.value}), seed={seed}, threads={threads}")
        chunks = [range(start, min(start + CHUNK_SIZE, reps)) for start in range(0, reps, CHUNK_SIZE)]

        def fn(rows: range):
            T = np.stack([draw_assignment_matrix(design, mechanism, replication_rng(seed, r), 1)[0] for r in rows])
            return evaluate(T)

    merged = merge_chunks(run_chunks(fn, chunks, threads, progress, desc=f"{mode} study"), ids)
    summaries = tuple(
        summarize_estimator(e, tau, vhat, true_var, mode == "exhaustive") for e, (tau, vhat) in merged.items()
    )
    return MCResult(mode, mechanism.value, "finite", total, true_var, 0.0, summaries, skipped)
