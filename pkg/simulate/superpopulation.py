"""
Superpopulation studies: an outer loop draws a sample (and its blocks) from a
sampling framework, an inner loop randomizes treatment within blocks.

Frameworks:
- srs: units sampled at random, blocks formed afterwards by sorting a covariate
- m1:  stratified sampling, n_k units from each of K fixed strata
- m2:  K whole strata drawn from a pool of finite strata

The framework-true variance is the empirical variance of tau_hat_blk over all
draws; standard errors are clustered by outer draw.
"""

import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from config import CHUNK_SIZE, DEFAULT_POOL_SIZE
from data_transform.summarize import block_arrays
from estimators.point import tau_blk_kernel
from estimators.report import check_applicable, get_spec
from oracle.population import StrataPopulation
from oracle.science import Design, Mechanism, ScienceTable
from simulate.assignment import auxiliary_rng, draw_assignment_matrix, replication_rng
from simulate.study import EstimatorSummary, MCResult, run_chunks
from utils.errors import EstimatorNotApplicable, ValidationError

logger = logging.getLogger(__name__)

POOL_STREAM = 1


class Frame(Protocol):
    name: str

    def draw(self, rng: np.random.Generator) -> tuple[ScienceTable, Design]:
        ...


def _labels(K: int) -> tuple[str, ...]:
    width = max(2, len(str(K)))
    return tuple(f"B{k:0{width}d}" for k in range(1, K + 1))


@dataclass(frozen=True)
class SrsFrame:
    """
    Covariate x ~ N(0, 1); y0 = a x + e0; y1 = base + (a + b) x + rho e0 + sqrt(1 - rho^2) e1.
    Units are sorted by x and cut into consecutive blocks of the given sizes.
    """

    sizes: tuple[int, ...]
    n_tk: tuple[int, ...]
    a: float
    b: float
    rho: float
    base_effect: float
    name: str = "srs"

    def draw(self, rng: np.random.Generator) -> tuple[ScienceTable, Design]:
        n = sum(self.sizes)
        x = np.sort(rng.standard_normal(n))
        e0 = rng.standard_normal(n)
        e1 = rng.standard_normal(n)
        y0 = self.a * x + e0
        y1 = self.base_effect + (self.a + self.b) * x + self.rho * e0 + math.sqrt(1 - self.rho ** 2) * e1
        labels = _labels(len(self.sizes))
        science = ScienceTable.from_arrays(np.repeat(np.array(labels), self.sizes), y0, y1)
        return science, Design.from_science(science, treated=dict(zip(labels, self.n_tk)))


@dataclass(frozen=True)
class StratifiedFrame:
    """n_k units per stratum, (y0, y1) bivariate normal with the stratum's moments."""

    population: StrataPopulation
    design: Design
    name: str = "m1"

    def __post_init__(self):
        self.population.check_matches(self.design)
        pop = self.population
        cov = (pop.var_t + pop.var_c - pop.var_tc) / 2
        limit = np.sqrt(pop.var_t * pop.var_c) * (1 + 1e-12) + 1e-12
        bad = [label for label, c, lim in zip(pop.labels, cov, limit) if abs(c) > lim]
        if bad:
            raise ValidationError(f"strata {bad}: var_tc implies a correlation outside [-1, 1]")

    def draw(self, rng: np.random.Generator) -> tuple[ScienceTable, Design]:
        pop, design = self.population, self.design
        sizes = design.sizes
        n = design.n
        sd_t, sd_c = np.sqrt(pop.var_t), np.sqrt(pop.var_c)
        cov = (pop.var_t + pop.var_c - pop.var_tc) / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(sd_t * sd_c > 0, cov / (sd_t * sd_c), 0.0)
        corr = np.clip(corr, -1.0, 1.0)
        z0 = rng.standard_normal(n)
        z1 = rng.standard_normal(n)

        def rep(v):
            return np.repeat(v, sizes)

        y0 = rep(pop.mu_c) + rep(sd_c) * z0
        y1 = rep(pop.mu_t) + rep(sd_t) * (rep(corr) * z0 + np.sqrt(1 - rep(corr) ** 2) * z1)
        science = ScienceTable.from_arrays(np.repeat(np.array(design.labels), sizes), y0, y1)
        return science, Design.from_science(science, treated=dict(zip(design.labels, design.n_tk)))


@dataclass(frozen=True, eq=False)
class SamplingFrame:
    """
    A fixed pool of finite strata; each draw includes K of them, uniformly without
    replacement. `inclusion` returns the indicator vector B over the pool for one draw.
    """

    pool: tuple[ScienceTable, ...]
    treated: tuple[int, ...]
    K: int
    name: str = "m2"

    def __post_init__(self):
        if not 2 <= self.K <= len(self.pool):
            raise ValidationError(f"K must be between 2 and the pool size {len(self.pool)}, got {self.K}")

    def inclusion(self, rng: np.random.Generator) -> np.ndarray:
        B = np.zeros(len(self.pool), dtype=bool)
        B[rng.choice(len(self.pool), size=self.K, replace=False)] = True
        return B

    def draw(self, rng: np.random.Generator) -> tuple[ScienceTable, Design]:
        chosen = np.flatnonzero(self.inclusion(rng))
        labels = _labels(self.K)
        block_ids, y0, y1, treated = [], [], [], {}
        for label, idx in zip(labels, chosen):
            stratum = self.pool[idx]
            block_ids.extend([label] * stratum.n)
            y0.append(stratum.y0)
            y1.append(stratum.y1)
            treated[label] = self.treated[idx]
        science = ScienceTable.from_arrays(block_ids, np.concatenate(y0), np.concatenate(y1))
        return science, Design.from_science(science, treated=treated)


def build_sampling_frame(
    K: int,
    seed: int,
    size_choices: Sequence[int] = (2, 3, 4),
    pool_size: int = DEFAULT_POOL_SIZE,
    a: float = 1.0,
    b: float = 1.0,
    rho: float = 0.5,
    base_effect: float = 5.0,
    size_effect: float = 0.0,
) -> SamplingFrame:
    """
    Pool of single-block strata with one treated unit each. Stratum s has size drawn
    uniformly from size_choices, control mean a * N(0, 1) and effect
    base_effect + b * N(0, 1) + size_effect * (size - mean size); size_effect = 0 keeps
    sizes independent of effects.
    """
    if min(size_choices) < 2:
        raise ValidationError("stratum sizes must be at least 2")
    rng = auxiliary_rng(seed, POOL_STREAM)
    sizes = rng.choice(np.asarray(size_choices), size=pool_size)
    centre = float(np.mean(size_choices))
    pool = []
    for m in sizes:
        alpha = a * rng.standard_normal()
        tau = base_effect + b * rng.standard_normal() + size_effect * (m - centre)
        e0 = rng.standard_normal(m)
        e1 = rng.standard_normal(m)
        y0 = alpha + e0
        y1 = alpha + tau + rho * e0 + math.sqrt(1 - rho ** 2) * e1
        pool.append(ScienceTable.from_arrays(["S"] * int(m), y0, y1))
    logger.info(f"Built a pool of {pool_size} strata with sizes {sorted(set(int(m) for m in sizes))}")
    return SamplingFrame(tuple(pool), tuple(1 for _ in sizes), K)


def _one_draw(frame: Frame, estimator_ids: Sequence[str], seed: int, r: int, reps_inner: int):
    rng = replication_rng(seed, r)
    science, design = frame.draw(rng)
    T = draw_assignment_matrix(design, Mechanism.BLOCKED, rng, reps_inner)
    Y = np.where(T, science.y1, science.y0)
    arr = block_arrays(Y, T, design.codes, design.n_k, design.n_tk, design.labels)
    out = {"_blk": tau_blk_kernel(arr)}
    for estimator_id in estimator_ids:
        spec = get_spec(estimator_id)
        try:
            check_applicable(estimator_id, design.labels, design.n_k, design.n_tk)
            out[estimator_id] = (spec.point(arr), spec.kernel(arr))
        except EstimatorNotApplicable:
            nan = np.full(reps_inner, np.nan)
            out[estimator_id] = (nan, nan)
    return out


def superpopulation_study(
    frame: Frame,
    estimator_ids: Sequence[str],
    reps_outer: int,
    reps_inner: int,
    seed: int,
    threads: int = 1,
    progress: bool = False,
) -> MCResult:
    if reps_outer < 2 or reps_inner < 1:
        raise ValidationError(f"need reps_outer >= 2 and reps_inner >= 1, got {reps_outer} and {reps_inner}")
    for estimator_id in estimator_ids:
        get_spec(estimator_id)
    logger.info(
        f"Superpopulation study ({frame.name}): {reps_outer} draws x {reps_inner} assignments, seed={seed}"
    )
    chunks = [range(s, min(s + CHUNK_SIZE, reps_outer)) for s in range(0, reps_outer, CHUNK_SIZE)]

    def fn(rows: range):
        return [_one_draw(frame, estimator_ids, seed, r, reps_inner) for r in rows]

    draws = [d for chunk in run_chunks(fn, chunks, threads, progress, desc=f"{frame.name} study") for d in chunk]

    blk = np.stack([d["_blk"] for d in draws])          # (R_outer, R_inner)
    grand = float(np.mean(blk))
    total = blk.size
    true_var = float(np.sum((blk - grand) ** 2) / (total - 1))
    sq_dev = np.mean((blk - grand) ** 2, axis=1) * total / (total - 1)   # per-draw contribution
    true_var_se = float(np.std(sq_dev, ddof=1) / math.sqrt(reps_outer))

    summaries, skipped = [], {}
    for estimator_id in estimator_ids:
        tau = np.stack([d[estimator_id][0] for d in draws])
        vhat = np.stack([d[estimator_id][1] for d in draws])
        valid = ~np.isnan(vhat[:, 0])
        n_valid = int(valid.sum())
        if n_valid < 2:
            skipped[estimator_id] = "not applicable on the sampled designs"
            logger.warning(f"Skipping estimator {estimator_id}: not applicable on the sampled designs")
            continue
        if n_valid < reps_outer:
            logger.warning(f"Estimator {estimator_id} not applicable on {reps_outer - n_valid} of {reps_outer} draws")
        per_draw = vhat[valid].mean(axis=1)
        diff = per_draw - sq_dev[valid]
        mean_vhat = float(np.mean(vhat[valid]))
        bias = mean_vhat - true_var
        summaries.append(
            EstimatorSummary(
                estimator_id=estimator_id,
                mean_tau=float(np.mean(tau[valid])),
                var_tau=float(np.var(tau[valid], ddof=1)),
                mean_vhat=mean_vhat,
                var_vhat=float(np.var(vhat[valid], ddof=1)),
                bias=bias,
                rel_bias=bias / true_var if true_var > 0 else math.nan,
                mc_se=float(np.std(per_draw, ddof=1) / math.sqrt(n_valid)),
                bias_se=float(np.std(diff, ddof=1) / math.sqrt(n_valid)),
                n_valid=n_valid,
            )
        )
    return MCResult("sampled", Mechanism.BLOCKED.value, frame.name, reps_outer, true_var, true_var_se,
                    tuple(summaries), skipped)
