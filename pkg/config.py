# config.py
"""
Central configuration for the blockvar toolkit.
Edit this file to change paths, defaults, file headers, etc.
Environment variables (optionally from a .env file) override a few runtime knobs.
"""
import os

from dotenv import load_dotenv

load_dotenv()

# Project root directory
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# --- Paths ---
DATA_DIR = os.path.join(BASE_DIR, "data")
EXAMPLES_DIR = os.path.join(DATA_DIR, "examples")
CONFIGS_DIR = os.path.join(BASE_DIR, "configs")
DEFAULT_SIM_CONFIG = os.path.join(CONFIGS_DIR, "default_sim.json")
OUTPUTS_DIR = os.path.join(BASE_DIR, "outputs")
SIM_RESULTS_CSV = os.path.join(OUTPUTS_DIR, "sim_results.csv")
SWEEP_RESULTS_CSV = os.path.join(OUTPUTS_DIR, "relative_bias_sweep.csv")
SUCCESS_MARK_NAME = "_SUCCESS"  # tiny marker file next to published CSVs

# --- Input file headers ---
EXPERIMENT_HEADER = ("unit_id", "block", "z", "y")
SCIENCE_HEADER = ("block", "y0", "y1")
DESIGN_HEADER = ("block", "n_t")
STRATA_FIELDS = ("label", "weight", "mu_t", "mu_c", "var_t", "var_c", "var_tc", "n_k", "n_tk")

# --- Estimators ---
# User-facing vocabulary, in display order
ESTIMATOR_IDS = (
    "cr",
    "big",
    "sb-equal",
    "sb-m",
    "sb-p",
    "hybrid-m",
    "hybrid-p",
    "srs",
    "rct-yes",
    "rct-yes2",
    "plugin",
)

# --- Simulation defaults (overridable by config file / flags) ---
DEFAULT_REPS = 5000
DEFAULT_SEED = 20180501
DEFAULT_BASE_EFFECT = 5.0
DEFAULT_MODE = "sampled"
ENUMERATION_CAP = 10**6
CHUNK_SIZE = 256  # replications per work unit; fixed so results do not depend on thread count
DEFAULT_REPS_INNER = 20
DEFAULT_POOL_SIZE = 4000

# --- Output formatting ---
SIG_DIGITS = 12
RESULTS_COLUMNS = ("estimator", "mean_tau", "var_tau", "mean_vhat", "rel_bias", "var_vhat", "mc_se")

# --- Logging ---
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVEL = os.getenv("BLOCKVAR_LOG_LEVEL", "INFO")

# --- Threads ---
THREADS_ENV = "BLOCKVAR_THREADS"
DEFAULT_THREADS = 1


def resolve_threads(cli_value: int | None) -> int:
    """Flag wins over BLOCKVAR_THREADS, which wins over DEFAULT_THREADS."""
    if cli_value is not None:
        threads = cli_value
    else:
        raw = os.getenv(THREADS_ENV)
        if raw is None or raw.strip() == "":
            return DEFAULT_THREADS
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads
