"""
Stratified-sampling truths: strata of unbounded size, n_k units drawn per stratum,
then treatment randomized within blocks. Within-stratum treatment effect
heterogeneity drops out of the true variance.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from estimators.report import check_applicable
from oracle import finite
from oracle.expectation import BlockMoments, expected_estimate, small_block_bias
from oracle.science import Design, ScienceTable
from utils.errors import EstimatorNotApplicable, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stratum:
    label: str
    weight: float
    mu_t: float
    mu_c: float
    var_t: float
    var_c: float
    var_tc: float

    def __post_init__(self):
        for name in ("weight", "mu_t", "mu_c", "var_t", "var_c", "var_tc"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"stratum {self.label}: {name} must be finite")
        if self.weight <= 0:
            raise ValidationError(f"stratum {self.label}: weight must be positive, got {self.weight}")
        for name in ("var_t", "var_c", "var_tc"):
            if getattr(self, name) < 0:
                raise ValidationError(f"stratum {self.label}: {name} must be nonnegative")
        bound = self.var_t + self.var_c + 2 * math.sqrt(self.var_t * self.var_c)
        if self.var_tc > bound * (1 + 1e-12):
            raise ValidationError(
                f"stratum {self.label}: var_tc={self.var_tc} exceeds the covariance bound {bound}"
            )

    @property
    def tau(self) -> float:
        return self.mu_t - self.mu_c


@dataclass(frozen=True)
class StrataPopulation:
    """Strata ordered by label, matching Design ordering."""

    strata: tuple[Stratum, ...]

    def __post_init__(self):
        if not self.strata:
            raise ValidationError("population has no strata")
        labels = [s.label for s in self.strata]
        if len(set(labels)) != len(labels):
            raise ValidationError("population has duplicate stratum labels")
        total = math.fsum(s.weight for s in self.strata)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValidationError(f"stratum weights must sum to 1, got {total}")
        object.__setattr__(self, "strata", tuple(sorted(self.strata, key=lambda s: s.label)))

    def _field(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.strata], dtype=float)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.strata)

    @property
    def K(self) -> int:
        return len(self.strata)

    @cached_property
    def weights(self) -> np.ndarray:
        return self._field("weight")

    @cached_property
    def mu_t(self) -> np.ndarray:
        return self._field("mu_t")

    @cached_property
    def mu_c(self) -> np.ndarray:
        return self._field("mu_c")

    @cached_property
    def var_t(self) -> np.ndarray:
        return self._field("var_t")

    @cached_property
    def var_c(self) -> np.ndarray:
        return self._field("var_c")

    @cached_property
    def var_tc(self) -> np.ndarray:
        return self._field("var_tc")

    @property
    def tau_k(self) -> np.ndarray:
        return self.mu_t - self.mu_c

    @property
    def tau(self) -> float:
        return math.fsum(self.weights * self.tau_k)

    def mu(self, arm: str) -> float:
        return math.fsum(self.weights * self._arm_means(arm))

    def sigma2(self, arm: str) -> float:
        """Pooled variance: within-strata plus between-strata parts."""
        means = self._arm_means(arm)
        within = self.var_t if arm == "t" else self.var_c
        return math.fsum(self.weights * within) + finite.var_k_weighted(means, self.weights)

    @property
    def sigma2_tc(self) -> float:
        return math.fsum(self.weights * self.var_tc) + finite.var_k_weighted(self.tau_k, self.weights)

    def _arm_means(self, arm: str) -> np.ndarray:
        if arm == "t":
            return self.mu_t
        if arm == "c":
            return self.mu_c
        raise ValueError(f"arm must be 't' or 'c', got {arm!r}")

    def check_matches(self, design: Design) -> None:
        if self.labels != design.labels:
            raise ValidationError(f"design blocks {list(design.labels)} do not match strata {list(self.labels)}")
        expected = design.sizes / design.n
        off = [label for label, w, e in zip(self.labels, self.weights, expected) if not math.isclose(w, e, abs_tol=1e-9)]
        if off:
            raise ValidationError(f"stratum weights differ from n_k/n for {off}")


def true_var_m1(pop: StrataPopulation, design: Design) -> float:
    """sum_k (n_k/n)^2 (var_c,k/n_ck + var_t,k/n_tk)."""
    return BlockMoments.m1(pop, design).true_variance


def bias_m1(pop: StrataPopulation, design: Design, estimator_id: str) -> float:
    if estimator_id == "cr":
        raise EstimatorNotApplicable(
            "the pooled estimator under a blocked design is covered by ignore_blocking_bias"
        )
    pop.check_matches(design)
    check_applicable(estimator_id, design.labels, design.n_k, design.n_tk)
    if estimator_id == "big":
        return 0.0
    if estimator_id in ("sb-equal", "sb-m", "sb-p"):
        return small_block_bias(estimator_id, design.n_k, pop.tau_k)
    moments = BlockMoments.m1(pop, design)
    return expected_estimate(moments, estimator_id) - moments.true_variance


def _contrast_means(pop: StrataPopulation, p: float) -> np.ndarray:
    return math.sqrt(p / (1 - p)) * pop.mu_c + math.sqrt((1 - p) / p) * pop.mu_t


def _check_p(p: float) -> float:
    p = float(p)
    if not 0 < p < 1:
        raise ValidationError(f"treated proportion must be in (0, 1), got {p}")
    return p


def comparison_terms_m1(pop: StrataPopulation, design: Design, p_cr: float | None = None) -> dict[str, float]:
    """
    var(tau_hat_cr) - var(tau_hat_blk) split into the between-strata term at p_cr and
    the penalty for block proportions differing from p_cr (zero when p_k = p_cr).
    """
    pop.check_matches(design)
    p = float(design.p) if p_cr is None else _check_p(p_cr)
    n = design.n
    between = finite.var_k_weighted(_contrast_means(pop, p), pop.weights) / (n - 1)
    p_k = np.array([float(x) for x in design.p_k])
    penalty = math.fsum(
        (p - p_k) * design.sizes / n ** 2 * (pop.var_c / ((1 - p_k) * (1 - p)) - pop.var_t / (p_k * p))
    )
    return {"between": between, "proportion_penalty": penalty}


def compare_designs_m1(pop: StrataPopulation, design: Design) -> float:
    """(1/(n-1)) Var_k(sqrt(p/(1-p)) mu_c,k + sqrt((1-p)/p) mu_t,k); never negative."""
    if not design.p_k_equal:
        raise ValidationError(
            f"compare_designs_m1 needs one treated proportion in every block, got {[str(p) for p in design.p_k]}; "
            f"use compare_designs_unequal"
        )
    return comparison_terms_m1(pop, design)["between"]


def compare_designs_unequal(pop: StrataPopulation, design: Design, p_cr: float) -> float:
    terms = comparison_terms_m1(pop, design, p_cr)
    return terms["between"] + terms["proportion_penalty"]


def var_cr_m1(pop: StrataPopulation, design: Design, p_cr: float | None = None) -> float:
    """Variance of tau_hat_cr under stratified sampling and complete randomization of n*p_cr units."""
    pop.check_matches(design)
    n = design.n
    n_t = design.n_t if p_cr is None else _check_p(p_cr) * n
    n_c = n - n_t
    w = pop.weights
    sizes = design.sizes
    dev_c = pop.mu_c - pop.mu("c")
    dev_t = pop.mu_t - pop.mu("t")
    return (
        math.fsum(w * (pop.var_c / n_c + pop.var_t / n_t))
        + math.fsum(sizes * dev_c ** 2) / ((n - 1) * n_c)
        + math.fsum(sizes * dev_t ** 2) / ((n - 1) * n_t)
        - math.fsum(sizes * (pop.tau_k - pop.tau) ** 2) / (n * (n - 1))
    )


def var_cr_srs(pop: StrataPopulation, design: Design) -> float:
    """sigma2_c/n_c + sigma2_t/n_t with the pooled population variances."""
    pop.check_matches(design)
    return pop.sigma2("c") / design.n_c + pop.sigma2("t") / design.n_t


def srs_vs_m1_gap(pop: StrataPopulation, design: Design) -> float:
    """var(tau_hat_cr | SRS) - var(tau_hat_cr | stratified sampling); either sign."""
    pop.check_matches(design)
    n, n_t, n_c = design.n, design.n_t, design.n_c
    dev_c = pop.mu_c - pop.mu("c")
    dev_t = pop.mu_t - pop.mu("t")
    return math.fsum(
        design.sizes / (n * (n - 1))
        * ((n_c - 1) / n_c * dev_c ** 2 + (n_t - 1) / n_t * dev_t ** 2 - 2 * dev_c * dev_t)
    )


def ignore_blocking_bias_m1(pop: StrataPopulation, design: Design) -> float:
    """sum_k w_k (mu_c,k - mu_c)^2/(n_c - 1) + sum_k w_k (mu_t,k - mu_t)^2/(n_t - 1); never negative."""
    pop.check_matches(design)
    if not design.p_k_equal:
        raise ValidationError("ignore_blocking_bias needs one treated proportion in every block")
    if design.n_t < 2 or design.n_c < 2:
        raise EstimatorNotApplicable(f"insufficient units in arm: n_t={design.n_t}, n_c={design.n_c}")
    return (finite.var_k_weighted(pop.mu_c, pop.weights) / (design.n_c - 1)
            + finite.var_k_weighted(pop.mu_t, pop.weights) / (design.n_t - 1))


def ignore_blocking_bias(source: ScienceTable | StrataPopulation, design: Design, framework: str) -> float:
    if framework == "finite":
        if not isinstance(source, ScienceTable):
            raise ValidationError("the finite framework needs a science table")
        return finite.ignore_blocking_bias_finite(source, design)
    if framework == "m1":
        if not isinstance(source, StrataPopulation):
            raise ValidationError("the m1 framework needs a strata population")
        return ignore_blocking_bias_m1(source, design)
    raise ValidationError(f"framework must be 'finite' or 'm1', got {framework!r}")

