"""
Monte Carlo studies over a fixed science table: determinism, mechanism handling, accuracy.
"""

import dataclasses
import os

import numpy as np
import pandas as pd
import pytest

from config import RESULTS_COLUMNS
from data_ingest.read_strata import load_simulation_config
from oracle.finite import bias_finite
from oracle.science import Design
from simulate.dgp import DGPConfig, design_from_config, generate_dgp, random_science
from simulate.runner import blocking_vs_cr_study, run_simulation, write_results
from simulate.study import monte_carlo_study
from tests.conftest import CONFIGS
from utils.errors import EnumerationCapExceeded, EstimatorNotApplicable, ValidationError


@pytest.fixture
def mixed():
    science = random_science(np.random.default_rng(31), [2, 2, 3, 3, 4, 6])
    design = Design.from_science(science, treated={"B01": 1, "B02": 1, "B03": 1, "B04": 1, "B05": 2, "B06": 3})
    return science, design


def test_same_result_for_any_thread_count(mixed):
    science, design = mixed
    ids = ["cr", "hybrid-m", "hybrid-p", "rct-yes2"]
    one = monte_carlo_study(science, design, ids, 1000, 99, threads=1)
    four = monte_carlo_study(science, design, ids, 1000, 99, threads=4)
    pd.testing.assert_frame_equal(one.to_frame(), four.to_frame(), check_exact=True)
    again = monte_carlo_study(science, design, ids, 1000, 100, threads=1)
    assert not one.to_frame().equals(again.to_frame())


def test_sampled_study_tracks_the_oracle(mixed):
    science, design = mixed
    result = monte_carlo_study(science, design, ["hybrid-p", "rct-yes"], 4000, 5)
    for est in result.estimators:
        expected = bias_finite(science, design, est.estimator_id)
        assert abs(est.bias - expected) < 4 * est.bias_se + 1e-12, est.estimator_id


def test_complete_mechanism_runs_only_the_pooled_estimator(mixed):
    science, design = mixed
    result = monte_carlo_study(science, design, ["cr", "hybrid-p"], 50, 1, mechanism="complete")
    assert [e.estimator_id for e in result.estimators] == ["cr"]
    assert "hybrid-p" in result.skipped
    assert result.mechanism == "complete"


def test_inapplicable_estimators_are_skipped(mixed):
    science, design = mixed
    result = monte_carlo_study(science, design, ["big", "sb-p", "hybrid-p"], 20, 1)
    assert [e.estimator_id for e in result.estimators] == ["hybrid-p"]
    assert "small blocks" in result.skipped["big"]
    assert "big blocks ['B05', 'B06']" in result.skipped["sb-p"]
    with pytest.raises(EstimatorNotApplicable):
        monte_carlo_study(science, design, ["big", "srs"], 20, 1)


def test_bad_arguments(mixed):
    science, design = mixed
    with pytest.raises(ValidationError, match="mode must be one of"):
        monte_carlo_study(science, design, ["hybrid-p"], 20, 1, mode="bootstrap")
    with pytest.raises(ValidationError, match="reps must be at least 2"):
        monte_carlo_study(science, design, ["hybrid-p"], 1, 1)
    with pytest.raises(EnumerationCapExceeded):
        monte_carlo_study(science, design, ["hybrid-p"], 0, 1, mode="exhaustive", cap=10)


def test_tiny_exhaustive_config_matches_oracle(tmp_path):
    cfg = load_simulation_config(os.path.join(CONFIGS, "tiny_exhaustive.json"))
    result = run_simulation(cfg)
    assert result.mode == "exhaustive"
    assert result.reps == 2 * 2 * 6 * 6
    out = tmp_path / "results.csv"
    write_results(result, str(out))
    frame = pd.read_csv(out)
    assert tuple(frame.columns) == RESULTS_COLUMNS
    assert (tmp_path / "_SUCCESS").exists()

    dgp = DGPConfig.from_simulation(cfg)
    science = generate_dgp(dgp)
    design = design_from_config(dgp, science)
    for row in frame.itertuples():
        if row.estimator == "cr":
            continue
        expected = bias_finite(science, design, row.estimator) / result.true_var
        assert row.rel_bias == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_default_config_loads():
    cfg = load_simulation_config(os.path.join(CONFIGS, "default_sim.json"))
    assert cfg.K == 15 and sum(cfg.sizes) == 104 and sum(cfg.n_t) == 22
    small = sum(s for s, t in zip(cfg.sizes, cfg.n_t) if t < 2 or s - t < 2)
    assert small == 52
    small_run = dataclasses.replace(cfg, reps=20)
    assert run_simulation(small_run).reps == 20


def test_blocking_gains_grow_with_control_mean_spread():
    cfg = load_simulation_config(os.path.join(CONFIGS, "tiny_exhaustive.json"))
    frame = blocking_vs_cr_study(cfg, [0.0, 1.0, 4.0])
    assert list(frame["a"]) == [0.0, 1.0, 4.0]
    np.testing.assert_allclose(frame["difference"], frame["var_cr"] - frame["var_blk"])
    assert frame["difference"].iloc[-1] > max(frame["difference"].iloc[0], 0.0)
    assert frame["r2"].iloc[-1] > frame["r2"].iloc[0]
    assert frame["ratio"].iloc[-1] < 1.0
