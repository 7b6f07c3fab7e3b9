"""
Runtime knobs and simulation config parsing.
"""

import os

import pytest

from config import DEFAULT_THREADS, THREADS_ENV, resolve_threads
from data_ingest.read_strata import load_simulation_config, parse_simulation_config
from simulate.runner import frame_from_config
from simulate.superpopulation import SamplingFrame
from tests.conftest import CONFIGS
from utils.errors import ValidationError

BASE = {"K": 2, "sizes": [4, 4], "n_t": [2, 2], "rho": 0.5, "a": 1.0, "b": 1.0}


def test_threads_flag_wins_over_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "8")
    assert resolve_threads(3) == 3
    assert resolve_threads(None) == 8


def test_threads_default_and_bad_values(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(None) == DEFAULT_THREADS
    monkeypatch.setenv(THREADS_ENV, "  ")
    assert resolve_threads(None) == DEFAULT_THREADS
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ValueError, match=THREADS_ENV):
        resolve_threads(None)
    with pytest.raises(ValueError, match=">= 1"):
        resolve_threads(0)


def test_minimal_config_takes_defaults():
    cfg = parse_simulation_config(dict(BASE))
    assert cfg.mode == "sampled"
    assert cfg.mechanism == "blocked"
    assert cfg.framework is None
    assert cfg.labels == ("B01", "B02")
    assert cfg.design().n_tk == (2, 2)


@pytest.mark.parametrize(
    "patch, match",
    [
        ({"K": 3}, "'sizes' must have K=3"),
        ({"n_t": [2, 4]}, "'n_t' entry 1"),
        ({"rho": 2}, "'rho'"),
        ({"a": -1}, "'a' must be nonnegative"),
        ({"reps": 1}, "'reps' must be at least 2"),
        ({"seed": -5}, "'seed'"),
        ({"mode": "fast"}, "'mode'"),
        ({"estimators": ["sb-q"]}, "unknown estimator"),
        ({"estimators": []}, "at least one estimator"),
        ({"mechanism": "cluster"}, "'mechanism'"),
        ({"framework": "m3"}, "'framework'"),
        ({"framework": "m1", "mode": "exhaustive"}, "must be 'sampled'"),
        ({"sizes": [4, True]}, "must hold integers"),
        ({"rho": "high"}, "finite number"),
        ({"colour": "red"}, "'colour' is not recognized"),
    ],
)
def test_config_errors_name_the_field(patch, match):
    raw = dict(BASE)
    raw.update(patch)
    with pytest.raises(ValidationError, match=match):
        parse_simulation_config(raw)


def test_missing_required_field():
    raw = dict(BASE)
    del raw["b"]
    with pytest.raises(ValidationError, match="'b' is required"):
        parse_simulation_config(raw)


def test_invalid_json_file(write_file):
    path = write_file("cfg.json", '{"K": 2,')
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_simulation_config(path)


def test_superpopulation_config_builds_its_frame():
    cfg = load_simulation_config(os.path.join(CONFIGS, "m2_superpopulation.json"))
    frame = frame_from_config(cfg)
    assert isinstance(frame, SamplingFrame)
    assert frame.K == cfg.K
    assert len(frame.pool) == 4000
