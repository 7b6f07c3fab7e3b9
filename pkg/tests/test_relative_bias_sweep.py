"""
Relative bias of the hybrid estimators on the 15-block default config as block
treatment effects spread out. Outcomes are perfectly correlated within blocks, so
effects are constant inside each block and every bias comes from between-block spread.
"""

import dataclasses
import os

import pytest

from data_ingest.read_strata import load_simulation_config
from oracle.finite import bias_finite, true_var_finite
from oracle.science import Mechanism
from simulate.dgp import DGPConfig, design_from_config, generate_dgp
from simulate.runner import run_sweep
from tests.conftest import CONFIGS

pytestmark = pytest.mark.slow

B_VALUES = (0.0, 1.0, 2.0, 4.0)
HYBRIDS = ("hybrid-m", "hybrid-p")


@pytest.fixture(scope="module")
def cfg():
    return dataclasses.replace(load_simulation_config(os.path.join(CONFIGS, "default_sim.json")), reps=5000)


@pytest.fixture(scope="module")
def sweep(cfg):
    return run_sweep(cfg, [1.0], B_VALUES, threads=2)


def exact_rel_bias(cfg, b, estimator_id):
    dgp = DGPConfig.from_simulation(dataclasses.replace(cfg, rho=1.0, b=b))
    science = generate_dgp(dgp)
    design = design_from_config(dgp, science)
    return bias_finite(science, design, estimator_id) / true_var_finite(science, design, Mechanism.BLOCKED)


def rows_for(sweep, estimator_id):
    return sweep[sweep["estimator"] == estimator_id].sort_values("b").reset_index(drop=True)


def test_sweep_layout(sweep, cfg):
    assert len(sweep) == len(B_VALUES) * len(cfg.estimators)
    assert list(sweep.columns) == [
        "rho", "b", "effect_sd", "r2", "estimator", "true_var", "mean_vhat", "rel_bias", "rel_bias_se",
    ]
    sd = rows_for(sweep, "hybrid-p")["effect_sd"].tolist()
    assert sd[0] == pytest.approx(0.0, abs=1e-9)
    assert sd == sorted(sd)


def test_hybrid_unbiased_without_effect_spread(sweep):
    row = rows_for(sweep, "hybrid-p").iloc[0]
    assert row["b"] == 0.0
    assert abs(row["rel_bias"]) < 3 * row["rel_bias_se"]


@pytest.mark.parametrize("estimator_id", HYBRIDS)
def test_simulated_bias_matches_exact(sweep, cfg, estimator_id):
    rows = rows_for(sweep, estimator_id)
    for _, row in rows.iterrows():
        exact = exact_rel_bias(cfg, row["b"], estimator_id)
        assert abs(row["rel_bias"] - exact) < 4 * row["rel_bias_se"], (row["b"], row["rel_bias"], exact)


@pytest.mark.parametrize("estimator_id", HYBRIDS)
def test_bias_nondecreasing_in_effect_spread(cfg, estimator_id):
    exact = [exact_rel_bias(cfg, b, estimator_id) for b in B_VALUES]
    assert exact[0] == pytest.approx(0.0, abs=1e-9)
    assert all(later >= earlier - 1e-12 for earlier, later in zip(exact, exact[1:]))
    assert exact[-1] > 0


def test_size_grouping_lowers_bias_when_effects_track_size(cfg):
    b = B_VALUES[-1]
    assert exact_rel_bias(cfg, b, "hybrid-m") < exact_rel_bias(cfg, b, "hybrid-p")
