"""
Science tables from the simulation data generating process.

Block k of K (1-based) has control mean alpha_k = q_k * a and effect
beta_k = base_effect + q_k * b with q_k = Phi^-1(1 - k/(K+1)). Units draw
y0 = alpha_k + e0 and y1 = alpha_k + beta_k + rho * e0 + sqrt(1 - rho^2) * e1
with independent standard normal e0, e1.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from config import DEFAULT_BASE_EFFECT, DEFAULT_SEED
from data_ingest.read_strata import SimulationConfig
from oracle import finite
from oracle.population import StrataPopulation, Stratum
from oracle.science import Design, ScienceTable
from simulate.assignment import auxiliary_rng
from utils.errors import ValidationError

logger = logging.getLogger(__name__)

SCIENCE_STREAM = 0


@dataclass(frozen=True)
class DGPConfig:
    sizes: tuple[int, ...]
    n_tk: tuple[int, ...]
    rho: float
    a: float
    b: float
    base_effect: float = DEFAULT_BASE_EFFECT
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if len(self.sizes) != len(self.n_tk) or not self.sizes:
            raise ValidationError("sizes and n_tk must be non-empty and of equal length")
        if not -1 <= self.rho <= 1:
            raise ValidationError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.a < 0 or self.b < 0:
            raise ValidationError(f"a and b must be nonnegative, got a={self.a}, b={self.b}")

    @classmethod
    def from_simulation(cls, cfg: SimulationConfig) -> "DGPConfig":
        return cls(cfg.sizes, cfg.n_t, cfg.rho, cfg.a, cfg.b, cfg.base_effect, cfg.seed)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def labels(self) -> tuple[str, ...]:
        width = max(2, len(str(self.K)))
        return tuple(f"B{k:0{width}d}" for k in range(1, self.K + 1))

    def quantiles(self) -> np.ndarray:
        k = np.arange(1, self.K + 1)
        return norm.ppf(1 - k / (self.K + 1))

    def alpha(self) -> np.ndarray:
        return self.quantiles() * self.a

    def beta(self) -> np.ndarray:
        return self.base_effect + self.quantiles() * self.b


def generate_dgp(config: DGPConfig) -> ScienceTable:
    rng = auxiliary_rng(config.seed, SCIENCE_STREAM)
    sizes = np.asarray(config.sizes)
    n = int(sizes.sum())
    alpha = np.repeat(config.alpha(), sizes)
    beta = np.repeat(config.beta(), sizes)
    e0 = rng.standard_normal(n)
    e1 = rng.standard_normal(n)
    y0 = alpha + e0
    y1 = alpha + beta + config.rho * e0 + math.sqrt(1 - config.rho ** 2) * e1
    block_ids = np.repeat(np.array(config.labels), sizes)
    return ScienceTable.from_arrays(block_ids, y0, y1)


def design_from_config(config: DGPConfig, science: ScienceTable) -> Design:
    return Design.from_science(science, treated=dict(zip(config.labels, config.n_tk)))


def population_from_config(config: DGPConfig) -> tuple[StrataPopulation, Design]:
    """The stratified-sampling population implied by the DGP: one stratum per block, weight n_k/n."""
    n = sum(config.sizes)
    alpha, beta = config.alpha(), config.beta()
    var_tc = 2.0 * (1.0 - config.rho)
    strata = tuple(
        Stratum(label, size / n, float(al + be), float(al), 1.0, 1.0, var_tc)
        for label, size, al, be in zip(config.labels, config.sizes, alpha, beta)
    )
    return StrataPopulation(strata), Design(config.labels, tuple(config.sizes), tuple(config.n_tk))


def r2_blocks(science: ScienceTable) -> float:
    """Share of the variation in (y0 + y1)/2 that lies between blocks."""
    m = (science.y0 + science.y1) / 2
    grand = math.fsum(m) / science.n
    total = math.fsum((m - grand) ** 2)
    if total == 0:
        logger.warning("No variation in mean potential outcomes; R2 of blocks set to 0")
        return 0.0
    block_means = np.array([math.fsum(m[science.codes == k]) / science.n_k[k] for k in range(science.K)])
    between = math.fsum(science.n_k * (block_means - grand) ** 2)
    return between / total


def realized_effect_sd(science: ScienceTable) -> float:
    """Size-weighted standard deviation of the block average treatment effects."""
    return math.sqrt(finite.var_k_weighted(science.tau_k, science.weights))


def random_science(rng: np.random.Generator, sizes, mean_sd: float = 1.0, effect_sd: float = 1.0,
                   noise_sd: float = 1.0) -> ScienceTable:
    """Small science table with random block means and effects; used for reconciliation checks."""
    sizes = np.asarray(sizes)
    K = len(sizes)
    labels = tuple(f"B{k:02d}" for k in range(1, K + 1))
    n = int(sizes.sum())
    alpha = np.repeat(rng.normal(0.0, mean_sd, K), sizes)
    tau = np.repeat(rng.normal(0.0, effect_sd, K), sizes)
    y0 = alpha + rng.normal(0.0, noise_sd, n)
    y1 = y0 + tau + rng.normal(0.0, noise_sd, n)
    return ScienceTable.from_arrays(np.repeat(np.array(labels), sizes), y0, y1)
