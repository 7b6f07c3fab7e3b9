"""
Exhaustive enumeration against the closed-form oracle.

Every assignment of a small science table is evaluated once, so the enumerated
means are exact and must match the oracle to rounding error.
"""

import numpy as np
import pytest

from config import ESTIMATOR_IDS
from oracle.finite import bias_finite, ignore_blocking_bias_finite, true_var_finite
from oracle.science import Design, Mechanism, ScienceTable
from simulate.study import monte_carlo_study

TOL = 1e-10


def test_enumeration_matches_oracle(small_tables):
    blocked_ids = [e for e in ESTIMATOR_IDS if e != "cr"]
    checked = set()
    mixed = 0
    for science, design in small_tables:
        assert science.n <= 12
        mixed += bool(design.big.any() and not design.big.all())
        result = monte_carlo_study(science, design, blocked_ids, 0, 0, mode="exhaustive")
        assert result.true_var == pytest.approx(true_var_finite(science, design), abs=TOL)
        for est in result.estimators:
            assert est.mean_tau == pytest.approx(science.tau, abs=TOL), est.estimator_id
            assert est.var_tau == pytest.approx(result.true_var, abs=TOL), est.estimator_id
            assert est.bias == pytest.approx(bias_finite(science, design, est.estimator_id), abs=TOL), \
                f"{est.estimator_id} on sizes {science.n_k.tolist()}"
            checked.add(est.estimator_id)

        if design.n_t >= 2 and design.n_c >= 2:
            cr = monte_carlo_study(science, design, ["cr"], 0, 0, mode="exhaustive", mechanism=Mechanism.COMPLETE)
            est = cr.get("cr")
            assert est.mean_tau == pytest.approx(science.tau, abs=TOL)
            assert est.var_tau == pytest.approx(cr.true_var, abs=TOL)
            assert est.bias == pytest.approx(science.s2_tc / science.n, abs=TOL)
            checked.add("cr")
    assert mixed >= 5
    assert {"cr", "big", "sb-equal", "sb-m", "sb-p"} <= checked


def test_pooled_estimator_under_blocked_assignment(small_tables):
    for science, design in small_tables:
        if not design.p_k_equal:
            continue
        result = monte_carlo_study(science, design, ["cr"], 0, 0, mode="exhaustive")
        assert result.get("cr").bias == pytest.approx(ignore_blocking_bias_finite(science, design), abs=TOL)


def test_ignoring_blocking_can_be_anti_conservative():
    """Identical effects within blocks and nearly equal block means: the pooled estimator falls short."""
    y0 = [-1.0, -1.0, 1.0, 1.0, -0.5, -0.5, 1.5, 1.5]
    science = ScienceTable.from_arrays(["A"] * 4 + ["B"] * 4, y0, [y + 2.0 for y in y0])
    design = Design.from_science(science, p="1/2")
    result = monte_carlo_study(science, design, ["cr"], 0, 0, mode="exhaustive")
    est = result.get("cr")
    assert result.true_var == pytest.approx(2 / 3)
    assert est.mean_vhat == pytest.approx(43 / 72)
    assert est.mean_vhat < result.true_var
    assert ignore_blocking_bias_finite(science, design) == pytest.approx(-5 / 72)


def test_identical_units_make_blocked_variance_estimate_constant():
    """Four strata of identical units: the blocked estimator never varies, the pooled one does."""
    base = np.repeat([0.0, 1.0, 2.0, 3.0], 4)
    science = ScienceTable.from_arrays(np.repeat(["A", "B", "C", "D"], 4), base, base + 1.0)
    design = Design.from_science(science, p="1/2")
    blocked = monte_carlo_study(science, design, ["big"], 0, 0, mode="exhaustive").get("big")
    complete = monte_carlo_study(science, design, ["cr"], 0, 0, mode="exhaustive",
                                 mechanism=Mechanism.COMPLETE).get("cr")
    assert blocked.var_vhat == 0.0
    assert blocked.var_tau == 0.0
    assert complete.var_vhat > 0
    assert complete.var_tau > 0
