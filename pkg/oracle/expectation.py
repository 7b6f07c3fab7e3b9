"""
Exact expectations of variance estimators from per-block moments.

Block estimates are independent across blocks under blocked randomization, so every
estimator in the registry is a quadratic form in the block effect estimates (or arm
means) plus a linear form in the within-arm sample variances. For a quadratic form
sum_i a_i (sum_j L_ij x_j)^2 with independent x_j of mean m_j and variance v_j,

    E = sum_i a_i [ (L m)_i^2 + sum_j L_ij^2 v_j ].

The same moments feed both the finite-sample oracle (science table moments) and the
stratified-sampling oracle (population moments).
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from estimators.report import check_applicable
from estimators.weights import sbp_weights
from utils.errors import EstimatorNotApplicable


@dataclass(frozen=True, eq=False)
class BlockMoments:
    labels: tuple[str, ...]
    n_k: np.ndarray
    n_tk: np.ndarray
    tau_k: np.ndarray         # E[tau_hat_k]
    var_tau_k: np.ndarray     # Var(tau_hat_k)
    mean_t: np.ndarray        # E of the treated arm mean
    mean_c: np.ndarray
    var_mean_t: np.ndarray    # Var of the treated arm mean
    var_mean_c: np.ndarray
    e_s2_t: np.ndarray        # E of the treated arm sample variance
    e_s2_c: np.ndarray

    @classmethod
    def finite(cls, science, design) -> "BlockMoments":
        """Moments over blocked assignments of a fixed science table."""
        design.check_matches(science)
        n_k = design.sizes
        n_tk = design.treated_counts
        n_ck = n_k - n_tk
        s2_t, s2_c = science.block_s2("t"), science.block_s2("c")
        return cls(
            labels=design.labels,
            n_k=n_k,
            n_tk=n_tk,
            tau_k=science.tau_k,
            var_tau_k=s2_t / n_tk + s2_c / n_ck - science.block_s2_tc / n_k,
            mean_t=science.block_means("t"),
            mean_c=science.block_means("c"),
            var_mean_t=(1.0 / n_tk - 1.0 / n_k) * s2_t,
            var_mean_c=(1.0 / n_ck - 1.0 / n_k) * s2_c,
            e_s2_t=s2_t,
            e_s2_c=s2_c,
        )

    @classmethod
    def m1(cls, pop, design) -> "BlockMoments":
        """Moments under stratified sampling of n_k units per stratum, then blocked assignment."""
        pop.check_matches(design)
        n_k = design.sizes
        n_tk = design.treated_counts
        n_ck = n_k - n_tk
        return cls(
            labels=design.labels,
            n_k=n_k,
            n_tk=n_tk,
            tau_k=pop.tau_k,
            var_tau_k=pop.var_t / n_tk + pop.var_c / n_ck,
            mean_t=pop.mu_t,
            mean_c=pop.mu_c,
            var_mean_t=pop.var_t / n_tk,
            var_mean_c=pop.var_c / n_ck,
            e_s2_t=pop.var_t,
            e_s2_c=pop.var_c,
        )

    @property
    def n(self) -> int:
        return int(self.n_k.sum())

    @property
    def n_ck(self) -> np.ndarray:
        return self.n_k - self.n_tk

    @property
    def weights(self) -> np.ndarray:
        return self.n_k / self.n

    @property
    def big(self) -> np.ndarray:
        return (self.n_tk >= 2) & (self.n_ck >= 2)

    @property
    def true_variance(self) -> float:
        """Var(tau_hat_blk) = sum_k w_k^2 Var(tau_hat_k)."""
        return float(np.sum(self.weights ** 2 * self.var_tau_k))

    def subset(self, mask) -> "BlockMoments":
        mask = np.asarray(mask, dtype=bool)
        return BlockMoments(
            labels=tuple(label for label, keep in zip(self.labels, mask) if keep),
            **{
                name: getattr(self, name)[mask]
                for name in ("n_k", "n_tk", "tau_k", "var_tau_k", "mean_t", "mean_c",
                             "var_mean_t", "var_mean_c", "e_s2_t", "e_s2_c")
            },
        )


def expected_quadratic(a, L, mean, var) -> float:
    a = np.asarray(a, dtype=float)
    L = np.asarray(L, dtype=float)
    centered = L @ np.asarray(mean, dtype=float)
    return float(np.sum(a * (centered ** 2 + (L ** 2) @ np.asarray(var, dtype=float))))


def _centering(K: int, center_weights) -> np.ndarray:
    """L = I - 1 c^T: deviations from the c-weighted mean."""
    return np.eye(K) - np.outer(np.ones(K), center_weights)


def _equal_dispersion(m: BlockMoments) -> float:
    K = len(m.labels)
    return expected_quadratic(np.full(K, 1.0 / (K * (K - 1))), _centering(K, np.full(K, 1.0 / K)),
                              m.tau_k, m.var_tau_k)


def _stratified(m: BlockMoments) -> float:
    n = m.n
    total = 0.0
    for size in np.unique(m.n_k):
        part = m.subset(m.n_k == size)
        total += (part.n / n) ** 2 * _equal_dispersion(part)
    return total


def _unified(m: BlockMoments) -> float:
    K = len(m.labels)
    a = sbp_weights(m.n_k).a_k
    return expected_quadratic(a, _centering(K, m.weights), m.tau_k, m.var_tau_k)


def _neyman_blocks(m: BlockMoments, e_s2_t=None, e_s2_c=None) -> float:
    e_s2_t = m.e_s2_t if e_s2_t is None else e_s2_t
    e_s2_c = m.e_s2_c if e_s2_c is None else e_s2_c
    return float(np.sum(m.weights ** 2 * (e_s2_t / m.n_tk + e_s2_c / m.n_ck)))


def expected_pooled_ss(counts, mean, var_mean, e_s2) -> float:
    """E of the pooled within-arm sum of squares: sum_k ss_k + sum_k n_k (mean_k - grand mean)^2."""
    counts = np.asarray(counts, dtype=float)
    within = np.sum(np.where(counts >= 2, (counts - 1) * e_s2, 0.0))
    c = counts / counts.sum()
    between = expected_quadratic(counts, _centering(len(counts), c), mean, var_mean)
    return float(within + between)


def _neyman_pooled(m: BlockMoments) -> float:
    n_t, n_c = int(m.n_tk.sum()), int(m.n_ck.sum())
    if n_t < 2 or n_c < 2:
        raise EstimatorNotApplicable(f"insufficient units in arm: n_t={n_t}, n_c={n_c}")
    ss_t = expected_pooled_ss(m.n_tk, m.mean_t, m.var_mean_t, m.e_s2_t)
    ss_c = expected_pooled_ss(m.n_ck, m.mean_c, m.var_mean_c, m.e_s2_c)
    return ss_t / ((n_t - 1) * n_t) + ss_c / ((n_c - 1) * n_c)


def _hybrid(m: BlockMoments, small) -> float:
    big = m.big
    if big.all():
        return _neyman_blocks(m)
    if not big.any():
        return small(m)
    n = m.n
    small_part = m.subset(~big)
    n_small = small_part.n
    return ((n - n_small) / n) ** 2 * _neyman_blocks(m.subset(big)) + (n_small / n) ** 2 * small(small_part)


def _srs(m: BlockMoments) -> float:
    n, K = m.n, len(m.labels)
    n_k = m.n_k
    within = np.sum(n_k * (n_k - 1) / (n * (n - 1)) * (m.e_s2_t / m.n_tk + m.e_s2_c / m.n_ck))
    between = expected_quadratic(n_k / (n * (n - 1)), _centering(K, m.weights), m.tau_k, m.var_tau_k)
    return float(within + between)


def _rct_yes(m: BlockMoments, variant: str) -> float:
    n, K = m.n, len(m.labels)
    prefactor = 1.0 / (K * (K - 1) * (n / K) ** 2)
    if variant == "v1":
        L = np.diag(m.n_k.astype(float)) - (n / K) * np.outer(np.ones(K), m.weights)
    else:
        L = np.diag(m.n_k.astype(float)) @ _centering(K, m.weights)
    return prefactor * expected_quadratic(np.ones(K), L, m.tau_k, m.var_tau_k)


def _plug_in(m: BlockMoments) -> float:
    big = m.big
    donor = m.n_k[big] / m.n_k[big].sum()
    e_s2_t = np.where(m.n_tk >= 2, m.e_s2_t, np.sum(donor * m.e_s2_t[big]))
    e_s2_c = np.where(m.n_ck >= 2, m.e_s2_c, np.sum(donor * m.e_s2_c[big]))
    return _neyman_blocks(m, e_s2_t, e_s2_c)


_EXPECTATIONS = {
    "cr": _neyman_pooled,
    "big": _neyman_blocks,
    "sb-equal": _equal_dispersion,
    "sb-m": _stratified,
    "sb-p": _unified,
    "hybrid-m": lambda m: _hybrid(m, _stratified),
    "hybrid-p": lambda m: _hybrid(m, _unified),
    "srs": _srs,
    "rct-yes": lambda m: _rct_yes(m, "v1"),
    "rct-yes2": lambda m: _rct_yes(m, "v2"),
    "plugin": _plug_in,
}


def expected_estimate(moments: BlockMoments, estimator_id: str) -> float:
    """
    E[v_hat] under blocked assignment with the given moments.

    For "cr" this is the pooled estimator applied to a blocked experiment, i.e. the
    estimator that ignores blocking.
    """
    if estimator_id != "cr":
        check_applicable(estimator_id, moments.labels, moments.n_k, moments.n_tk)
    return float(_EXPECTATIONS[estimator_id](moments))


def small_block_bias(estimator_id: str, n_k: Sequence[int], tau_k: Sequence[float]) -> float:
    """
    Closed-form bias of the small-block estimators given block effects.

    sb-equal and sb-m: sum over size groups of (N_j/n)^2 / (K_j (K_j - 1)) times the
    squared deviations of block effects from their size-group mean.
    sb-p: sum_k a_k (tau_k - tau)^2 with tau the size-weighted mean.
    """
    n_k = np.asarray(n_k)
    tau_k = np.asarray(tau_k, dtype=float)
    n = int(n_k.sum())
    if estimator_id == "sb-p":
        w = n_k / n
        a = sbp_weights(n_k).a_k
        return float(np.sum(a * (tau_k - np.sum(w * tau_k)) ** 2))
    if estimator_id not in ("sb-equal", "sb-m"):
        raise ValueError(f"no small-block closed form for {estimator_id!r}")
    total = 0.0
    for size in np.unique(n_k):
        group = tau_k[n_k == size]
        K_j = len(group)
        N_j = int(size) * K_j
        total += (N_j / n) ** 2 / (K_j * (K_j - 1)) * float(np.sum((group - group.mean()) ** 2))
    return total
