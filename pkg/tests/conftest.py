"""
Shared fixtures: random small science tables with half-treated blocks, file helpers.
"""

import os

import numpy as np
import pytest

from config import BASE_DIR, CONFIGS_DIR, EXAMPLES_DIR
from oracle.science import Design
from simulate.dgp import random_science

# n <= 12 with a mix of big (size >= 4) and small blocks
SMALL_PATTERNS = (
    (2, 2, 2, 2),
    (2, 2, 3, 3),
    (3, 3, 3, 3),
    (4, 4, 2, 2),
    (4, 4, 4),
    (4, 2, 2, 3),
)

EXAMPLES = EXAMPLES_DIR
CONFIGS = CONFIGS_DIR
GOLDEN = os.path.join(BASE_DIR, "tests", "golden")


def half_design(science) -> Design:
    return Design.from_science(science, treated={b: int(s) // 2 for b, s in zip(science.labels, science.n_k)})


@pytest.fixture
def small_tables():
    """20 (science, design) pairs cycling through SMALL_PATTERNS."""
    rng = np.random.default_rng(20180501)
    tables = []
    for i in range(20):
        science = random_science(rng, SMALL_PATTERNS[i % len(SMALL_PATTERNS)])
        tables.append((science, half_design(science)))
    return tables


@pytest.fixture
def write_file(tmp_path):
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write
