"""
Finite-sample oracle: true variances, closed-form biases and the blocking comparison.
"""

from fractions import Fraction

import numpy as np
import pytest

from oracle.expectation import BlockMoments, expected_estimate
from oracle.finite import (
    bias_finite,
    compare_designs_finite,
    comparison_terms_finite,
    cov_k_weighted,
    expected_s2_blocked,
    ignore_blocking_bias_finite,
    true_var_finite,
    var_k_weighted,
)
from oracle.science import Design, Mechanism, ScienceTable
from simulate.dgp import random_science
from utils.errors import ValidationError


def one_block():
    return ScienceTable.from_arrays(["A"] * 4, [0, 0, 0, 0], [1, 1, 3, 3])


def test_single_block_by_hand():
    science = one_block()
    design = Design.from_science(science, p="1/2")
    # S2_t = 4/3, S2_c = 0, S2_tc = 4/3: 4/3/2 - 4/3/4
    assert true_var_finite(science, design, Mechanism.COMPLETE) == pytest.approx(1 / 3)
    assert true_var_finite(science, design, Mechanism.BLOCKED) == pytest.approx(1 / 3)
    assert bias_finite(science, design, "cr") == pytest.approx(1 / 3)
    assert bias_finite(science, design, "big") == pytest.approx(1 / 3)
    assert compare_designs_finite(science, design) == pytest.approx(0.0, abs=1e-15)


def test_var_k_weighted():
    assert var_k_weighted([1.0, 3.0], [0.5, 0.5]) == pytest.approx(1.0)
    assert var_k_weighted([1.0, 3.0], [0.25, 0.75]) == pytest.approx(0.75)
    with pytest.raises(ValidationError, match="sum to 1"):
        var_k_weighted([1.0, 3.0], [0.5, 0.6])


def test_cov_k_weighted():
    x, w = [1.0, 3.0, 4.0], [0.25, 0.25, 0.5]
    assert cov_k_weighted(x, x, w) == pytest.approx(var_k_weighted(x, w))
    assert cov_k_weighted([1.0, 3.0], [2.0, -2.0], [0.5, 0.5]) == pytest.approx(-2.0)


def test_constant_effects_make_small_block_estimators_unbiased():
    rng = np.random.default_rng(9)
    y0 = rng.normal(size=12)
    science = ScienceTable.from_arrays(np.repeat(["A", "B", "C", "D", "E", "F"], 2), y0, y0 + 1.5)
    design = Design.from_science(science, p=Fraction(1, 2))
    for estimator_id in ("sb-equal", "sb-m", "sb-p", "hybrid-p", "rct-yes2"):
        assert bias_finite(science, design, estimator_id) == pytest.approx(0.0, abs=1e-12)


def test_closed_forms_agree_with_general_expectation():
    rng = np.random.default_rng(10)
    for sizes in ([4, 4, 4], [2, 2, 3, 3], [2, 2, 2, 2, 2]):
        science = random_science(rng, sizes)
        design = Design.from_science(science, treated={b: int(s) // 2 for b, s in zip(science.labels, science.n_k)})
        moments = BlockMoments.finite(science, design)
        for estimator_id in ("big", "sb-equal", "sb-m", "sb-p"):
            try:
                closed = bias_finite(science, design, estimator_id)
            except ValidationError:
                continue
            general = expected_estimate(moments, estimator_id) - moments.true_variance
            assert closed == pytest.approx(general, abs=1e-10)


def test_comparison_equals_difference_of_true_variances():
    """The between/within decomposition equals var(cr) - var(blk) on 100 equal-proportion tables."""
    rng = np.random.default_rng(11)
    for i in range(100):
        p = Fraction(1, 2) if i % 2 == 0 else Fraction(1, 3)
        unit = p.denominator
        K = int(rng.integers(1, 6))
        sizes = unit * rng.integers(2, 4, size=K)
        science = random_science(rng, sizes, mean_sd=float(rng.uniform(0, 3)))
        design = Design.from_science(science, p=p)
        direct = (true_var_finite(science, design, Mechanism.COMPLETE)
                  - true_var_finite(science, design, Mechanism.BLOCKED))
        assert compare_designs_finite(science, design) == pytest.approx(direct, abs=1e-10)


def test_blocking_helps_when_blocks_separate_outcomes():
    rng = np.random.default_rng(12)
    science = random_science(rng, [6, 6, 6], mean_sd=10.0, effect_sd=0.1, noise_sd=0.5)
    design = Design.from_science(science, p="1/2")
    terms = comparison_terms_finite(science, design)
    assert terms["between"] > 0 > terms["within"]
    assert compare_designs_finite(science, design) > 0


def test_comparison_requires_equal_proportions():
    science = random_science(np.random.default_rng(13), [4, 3])
    design = Design.from_science(science, treated={"B01": 2, "B02": 1})
    with pytest.raises(ValidationError, match="compare_designs_unequal"):
        compare_designs_finite(science, design)
    with pytest.raises(ValidationError, match="one treated proportion"):
        ignore_blocking_bias_finite(science, design)


def test_ignore_blocking_closed_form_matches_general_path():
    rng = np.random.default_rng(14)
    for sizes in ([4, 4, 6], [2, 2, 2, 2], [6, 2, 4, 8]):
        science = random_science(rng, sizes)
        design = Design.from_science(science, p="1/2")
        moments = BlockMoments.finite(science, design)
        general = expected_estimate(moments, "cr") - moments.true_variance
        assert ignore_blocking_bias_finite(science, design) == pytest.approx(general, abs=1e-10)
        n_t, n_c = design.n_t, design.n_c
        from_s2 = expected_s2_blocked(science, design, "t") / n_t + expected_s2_blocked(science, design, "c") / n_c
        assert from_s2 == pytest.approx(expected_estimate(moments, "cr"), abs=1e-10)


def test_design_validation():
    science = one_block()
    with pytest.raises(ValidationError, match="not a whole number"):
        Design.from_science(science, p="1/3")
    with pytest.raises(ValidationError, match="number or fraction"):
        Design.from_science(science, p="half")
    with pytest.raises(ValidationError, match="between 1 and n_k - 1"):
        Design.from_science(science, treated={"A": 4})
    other = ScienceTable.from_arrays(["A"] * 6, np.zeros(6), np.ones(6))
    with pytest.raises(ValidationError, match="do not match"):
        Design.from_science(other, p="1/2").check_matches(science)
