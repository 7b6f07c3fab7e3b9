"""
Stratified-sampling oracle: design comparison, proportion penalty and ignoring blocking.
"""

import math
import os

import numpy as np
import pytest

from data_ingest.read_strata import load_strata_json, parse_strata
from oracle.expectation import BlockMoments, expected_estimate
from oracle.population import (
    StrataPopulation,
    Stratum,
    bias_m1,
    compare_designs_m1,
    compare_designs_unequal,
    comparison_terms_m1,
    ignore_blocking_bias,
    ignore_blocking_bias_m1,
    srs_vs_m1_gap,
    true_var_m1,
    var_cr_m1,
    var_cr_srs,
)
from oracle.science import Design
from tests.conftest import EXAMPLES
from utils.errors import EstimatorNotApplicable, ValidationError


def random_population(rng, equal_p: bool = True):
    K = int(rng.integers(2, 7))
    if equal_p:
        n_k = 2 * rng.integers(2, 6, size=K)
        n_tk = n_k // 2
    else:
        n_k = rng.integers(4, 12, size=K)
        n_tk = np.array([int(rng.integers(1, m)) for m in n_k])
    n = int(n_k.sum())
    labels = tuple(f"S{k:02d}" for k in range(K))
    strata = []
    for label, m in zip(labels, n_k):
        var_t, var_c = rng.uniform(0.2, 3.0, size=2)
        corr = rng.uniform(-1, 1)
        var_tc = var_t + var_c - 2 * corr * math.sqrt(var_t * var_c)
        mu_c = rng.normal(0, 2)
        strata.append(Stratum(label, int(m) / n, mu_c + rng.normal(1, 1), mu_c, var_t, var_c, var_tc))
    design = Design(labels, tuple(int(x) for x in n_k), tuple(int(x) for x in n_tk))
    return StrataPopulation(tuple(strata)), design


def test_blocking_never_hurts_with_equal_proportions():
    rng = np.random.default_rng(21)
    for _ in range(100):
        pop, design = random_population(rng)
        value = compare_designs_m1(pop, design)
        assert value >= 0
        assert value == pytest.approx(var_cr_m1(pop, design) - true_var_m1(pop, design), abs=1e-10)


def test_unequal_comparison_reduces_at_common_proportion():
    rng = np.random.default_rng(22)
    for _ in range(100):
        pop, design = random_population(rng)
        p = float(design.p)
        assert compare_designs_unequal(pop, design, p) == pytest.approx(compare_designs_m1(pop, design), abs=1e-12)
        assert comparison_terms_m1(pop, design, p)["proportion_penalty"] == 0.0


def test_unequal_comparison_is_the_variance_difference():
    rng = np.random.default_rng(23)
    for _ in range(100):
        pop, design = random_population(rng, equal_p=False)
        p_cr = float(rng.uniform(0.2, 0.8))
        direct = var_cr_m1(pop, design, p_cr) - true_var_m1(pop, design)
        assert compare_designs_unequal(pop, design, p_cr) == pytest.approx(direct, abs=1e-10)


def test_unequal_proportions_can_make_blocking_worse():
    strata = (Stratum("A", 0.5, 1.0, 0.0, 1.0, 1.0, 1.0), Stratum("B", 0.5, 1.0, 0.0, 1.0, 1.0, 1.0))
    pop = StrataPopulation(strata)
    design = Design(("A", "B"), (10, 10), (1, 9))
    terms = comparison_terms_m1(pop, design)
    assert terms["between"] == 0.0
    assert terms["proportion_penalty"] < 0
    with pytest.raises(ValidationError, match="compare_designs_unequal"):
        compare_designs_m1(pop, design)


def test_srs_gap_is_the_variance_difference():
    rng = np.random.default_rng(24)
    for _ in range(50):
        pop, design = random_population(rng, equal_p=False)
        gap = var_cr_srs(pop, design) - var_cr_m1(pop, design)
        assert srs_vs_m1_gap(pop, design) == pytest.approx(gap, abs=1e-10)


def test_ignoring_blocking_is_conservative():
    rng = np.random.default_rng(25)
    for _ in range(100):
        pop, design = random_population(rng)
        value = ignore_blocking_bias_m1(pop, design)
        assert value >= 0
        moments = BlockMoments.m1(pop, design)
        general = expected_estimate(moments, "cr") - moments.true_variance
        assert value == pytest.approx(general, abs=1e-10)


def test_biases():
    pop, design = load_strata_json(os.path.join(EXAMPLES, "strata_equal_means.json"))
    assert bias_m1(pop, design, "big") == 0.0
    with pytest.raises(EstimatorNotApplicable, match="covers small blocks only"):
        bias_m1(pop, design, "sb-p")
    with pytest.raises(EstimatorNotApplicable, match="ignore_blocking_bias"):
        bias_m1(pop, design, "cr")


def test_small_block_bias_for_pair_strata():
    strata = (Stratum("A", 0.5, 1.0, 1.0, 1.0, 1.0, 1.0), Stratum("B", 0.5, 3.0, 1.0, 1.0, 1.0, 1.0))
    pop = StrataPopulation(strata)
    design = Design(("A", "B"), (2, 2), (1, 1))
    # 2 * 2^2 / (4^2 * 1) * ((0 - 1)^2 + (2 - 1)^2)
    for estimator_id in ("sb-equal", "sb-m", "sb-p"):
        assert bias_m1(pop, design, estimator_id) == pytest.approx(1.0)


def test_framework_dispatch_checks_the_source():
    pop, design = load_strata_json(os.path.join(EXAMPLES, "strata.json"))
    assert ignore_blocking_bias(pop, design, "m1") == pytest.approx(ignore_blocking_bias_m1(pop, design))
    with pytest.raises(ValidationError, match="needs a science table"):
        ignore_blocking_bias(pop, design, "finite")
    with pytest.raises(ValidationError, match="framework must be"):
        ignore_blocking_bias(pop, design, "m2")


def test_equal_means_give_no_gain():
    pop, design = load_strata_json(os.path.join(EXAMPLES, "strata_equal_means.json"))
    assert compare_designs_m1(pop, design) == 0.0
    assert var_cr_m1(pop, design) == pytest.approx(0.28125)
    assert true_var_m1(pop, design) == pytest.approx(0.28125)
    # pooled moments: no between-strata spread, so only the within parts remain
    assert pop.tau == pytest.approx(1.0)
    assert pop.sigma2("t") == pytest.approx(1.5)
    assert pop.sigma2("c") == pytest.approx(0.75)
    assert pop.sigma2_tc == pytest.approx(1.0)


@pytest.mark.parametrize(
    "records, message",
    [
        ([], "non-empty JSON array"),
        ([{"label": "A"}], "missing field"),
        ([{"label": "A", "weight": "x", "mu_t": 1, "mu_c": 0, "var_t": 1, "var_c": 1, "var_tc": 1,
           "n_k": 4, "n_tk": 2}], "field 'weight' must be a number"),
        ([{"label": "A", "weight": 1.0, "mu_t": 1, "mu_c": 0, "var_t": 1, "var_c": 1, "var_tc": 9,
           "n_k": 4, "n_tk": 2}], "covariance bound"),
        ([{"label": "A", "weight": 0.5, "mu_t": 1, "mu_c": 0, "var_t": 1, "var_c": 1, "var_tc": 1,
           "n_k": 4, "n_tk": 2}], "sum to 1"),
    ],
)
def test_strata_validation(records, message):
    with pytest.raises(ValidationError, match=message):
        parse_strata(records)
