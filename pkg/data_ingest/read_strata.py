"""
Load JSON inputs:
- strata populations: an array of {label, weight, mu_t, mu_c, var_t, var_c, var_tc, n_k, n_tk}
- simulation configs: {K, sizes, n_t, rho, a, b, base_effect, reps, seed, mode, estimators,
  mechanism?, framework?, framework_params?}
Errors name the offending field.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any

from config import (
    DEFAULT_BASE_EFFECT,
    DEFAULT_MODE,
    DEFAULT_REPS,
    DEFAULT_SEED,
    ESTIMATOR_IDS,
    STRATA_FIELDS,
)
from oracle.population import StrataPopulation, Stratum
from oracle.science import Design
from utils.errors import ValidationError
from utils.io_utils import read_text

logger = logging.getLogger(__name__)

MODES = ("exhaustive", "sampled")
MECHANISMS = ("blocked", "complete")
FRAMEWORKS = ("srs", "m1", "m2")


def _loads(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{what} is not valid JSON: {e.msg}, line {e.lineno}") from e


# --- strata populations ---

def _number(rec: dict, name: str, where: str) -> float:
    value = rec.get(name)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: field {name!r} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{where}: field {name!r} must be finite")
    return float(value)


def _integer(rec: dict, name: str, where: str) -> int:
    value = rec.get(name)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: field {name!r} must be an integer, got {value!r}")
    return value


def parse_strata(records: Any) -> tuple[StrataPopulation, Design]:
    if not isinstance(records, list) or not records:
        raise ValidationError("strata file must hold a non-empty JSON array")
    strata, sizes, treated = [], {}, {}
    for i, rec in enumerate(records):
        where = f"stratum {i}"
        if not isinstance(rec, dict):
            raise ValidationError(f"{where}: expected an object")
        missing = [name for name in STRATA_FIELDS if name not in rec]
        if missing:
            raise ValidationError(f"{where}: missing field(s) {missing}")
        label = str(rec["label"])
        if label in sizes:
            raise ValidationError(f"{where}: duplicate label {label!r}")
        strata.append(
            Stratum(
                label,
                *(_number(rec, name, where) for name in ("weight", "mu_t", "mu_c", "var_t", "var_c", "var_tc")),
            )
        )
        sizes[label] = _integer(rec, "n_k", where)
        treated[label] = _integer(rec, "n_tk", where)
    pop = StrataPopulation(tuple(strata))
    design = Design.from_counts(sizes, treated)
    pop.check_matches(design)
    logger.info(f"Loaded {pop.K} strata, n={design.n}, n_t={design.n_t}")
    return pop, design


def load_strata_json(path: str) -> tuple[StrataPopulation, Design]:
    return parse_strata(_loads(read_text(path), f"strata file {path}"))


# --- simulation configs ---

@dataclass(frozen=True)
class SimulationConfig:
    K: int
    sizes: tuple[int, ...]
    n_t: tuple[int, ...]
    rho: float
    a: float
    b: float
    base_effect: float = DEFAULT_BASE_EFFECT
    reps: int = DEFAULT_REPS
    seed: int = DEFAULT_SEED
    mode: str = DEFAULT_MODE
    estimators: tuple[str, ...] = ESTIMATOR_IDS
    mechanism: str = "blocked"
    framework: str | None = None
    framework_params: dict = field(default_factory=dict, compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        width = max(2, len(str(self.K)))
        return tuple(f"B{k:0{width}d}" for k in range(1, self.K + 1))

    def design(self) -> Design:
        return Design(self.labels, self.sizes, self.n_t)


def _field(raw: dict, name: str, kind, default=None, required: bool = False):
    if name not in raw:
        if required:
            raise ValidationError(f"config field {name!r} is required")
        return default
    value = raw[name]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"config field {name!r} must be an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValidationError(f"config field {name!r} must be a finite number, got {value!r}")
        value = float(value)
    elif kind is list:
        if not isinstance(value, list):
            raise ValidationError(f"config field {name!r} must be an array, got {value!r}")
    elif kind is str:
        if not isinstance(value, str):
            raise ValidationError(f"config field {name!r} must be a string, got {value!r}")
    elif kind is dict:
        if not isinstance(value, dict):
            raise ValidationError(f"config field {name!r} must be an object, got {value!r}")
    return value


def _int_list(raw: dict, name: str) -> tuple[int, ...]:
    values = _field(raw, name, list, required=True)
    if any(isinstance(v, bool) or not isinstance(v, int) for v in values):
        raise ValidationError(f"config field {name!r} must hold integers")
    return tuple(values)


def parse_simulation_config(raw: Any) -> SimulationConfig:
    if not isinstance(raw, dict):
        raise ValidationError("simulation config must be a JSON object")
    known = {f for f in SimulationConfig.__dataclass_fields__}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"config field {unknown[0]!r} is not recognized")

    K = _field(raw, "K", int, required=True)
    if K < 1:
        raise ValidationError(f"config field 'K' must be positive, got {K}")
    sizes = _int_list(raw, "sizes")
    n_t = _int_list(raw, "n_t")
    if len(sizes) != K:
        raise ValidationError(f"config field 'sizes' must have K={K} entries, got {len(sizes)}")
    if len(n_t) != K:
        raise ValidationError(f"config field 'n_t' must have K={K} entries, got {len(n_t)}")
    for k, (s, t) in enumerate(zip(sizes, n_t)):
        if not 1 <= t <= s - 1:
            raise ValidationError(f"config field 'n_t' entry {k}: must be between 1 and sizes[{k}] - 1, got {t} of {s}")

    rho = _field(raw, "rho", float, required=True)
    if abs(rho) > 1:
        raise ValidationError(f"config field 'rho' must lie in [-1, 1], got {rho}")
    a = _field(raw, "a", float, required=True)
    b = _field(raw, "b", float, required=True)
    for name, value in (("a", a), ("b", b)):
        if value < 0:
            raise ValidationError(f"config field {name!r} must be nonnegative, got {value}")
    base_effect = _field(raw, "base_effect", float, DEFAULT_BASE_EFFECT)

    reps = _field(raw, "reps", int, DEFAULT_REPS)
    if reps < 2:
        raise ValidationError(f"config field 'reps' must be at least 2, got {reps}")
    seed = _field(raw, "seed", int, DEFAULT_SEED)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"config field 'seed' must be a 64-bit unsigned integer, got {seed}")
    mode = _field(raw, "mode", str, DEFAULT_MODE)
    if mode not in MODES:
        raise ValidationError(f"config field 'mode' must be one of {MODES}, got {mode!r}")

    estimators = tuple(_field(raw, "estimators", list, list(ESTIMATOR_IDS)))
    if not estimators:
        raise ValidationError("config field 'estimators' must name at least one estimator")
    bad = [e for e in estimators if e not in ESTIMATOR_IDS]
    if bad:
        raise ValidationError(f"config field 'estimators': unknown estimator(s) {bad}")

    mechanism = _field(raw, "mechanism", str, "blocked")
    if mechanism not in MECHANISMS:
        raise ValidationError(f"config field 'mechanism' must be one of {MECHANISMS}, got {mechanism!r}")
    framework = raw.get("framework")
    if framework is not None and framework not in FRAMEWORKS:
        raise ValidationError(f"config field 'framework' must be one of {FRAMEWORKS} or null, got {framework!r}")
    framework_params = _field(raw, "framework_params", dict, {})
    if framework is not None and mode == "exhaustive":
        raise ValidationError("config field 'mode' must be 'sampled' for superpopulation frameworks")

    return SimulationConfig(
        K=K, sizes=sizes, n_t=n_t, rho=rho, a=a, b=b, base_effect=base_effect, reps=reps, seed=seed,
        mode=mode, estimators=estimators, mechanism=mechanism, framework=framework,
        framework_params=framework_params,
    )


def load_simulation_config(path: str) -> SimulationConfig:
    cfg = parse_simulation_config(_loads(read_text(path), f"config {path}"))
    logger.info(f"Loaded simulation config {path}: K={cfg.K}, n={sum(cfg.sizes)}, reps={cfg.reps}, mode={cfg.mode}")
    return cfg
