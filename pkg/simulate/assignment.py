"""
Treatment assignment: random draws, counts and exhaustive enumeration.

RNG: numpy Generator with the PCG64 bit generator. Replication r of a study seeded
with `seed` draws from SeedSequence(seed, spawn_key=(r,)); auxiliary streams (the
science-table draw, the stratum pool) use spawn_key=(0, i). Streams depend only on
(seed, r), never on which worker runs the replication.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from config import CHUNK_SIZE, ENUMERATION_CAP
from oracle.science import Design, Mechanism
from utils.errors import EnumerationCapExceeded

logger = logging.getLogger(__name__)


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


def auxiliary_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, i)))


@dataclass(frozen=True, eq=False)
class Assignment:
    treated: np.ndarray          # bool per unit, in design unit order
    mechanism: Mechanism

    def treated_counts(self, design: Design) -> np.ndarray:
        return np.bincount(design.codes, weights=self.treated.astype(float), minlength=design.K).astype(np.int64)


def _block_units(design: Design) -> list[np.ndarray]:
    codes = design.codes
    return [np.flatnonzero(codes == k) for k in range(design.K)]


def _groups(design: Design, mechanism: Mechanism) -> list[tuple[np.ndarray, int]]:
    """(unit indices, treated count) per randomization group."""
    if mechanism is Mechanism.COMPLETE:
        return [(np.arange(design.n), design.n_t)]
    return list(zip(_block_units(design), design.n_tk))


def draw_assignment_matrix(design: Design, mechanism: Mechanism | str, rng: np.random.Generator,
                           size: int) -> np.ndarray:
    """
    `size` independent uniform assignments, shape (size, n).

    Within each group the treated units are those with the n_t smallest of n iid
    uniform keys, which is a uniform draw over subsets of that size.
    """
    mechanism = Mechanism(mechanism)
    T = np.zeros((size, design.n), dtype=bool)
    keys = rng.random((size, design.n))
    rows = np.arange(size)[:, None]
    for units, n_t in _groups(design, mechanism):
        chosen = np.argsort(keys[:, units], axis=1, kind="stable")[:, :n_t]
        T[rows, units[chosen]] = True
    return T


def draw_assignment(design: Design, mechanism: Mechanism | str, rng: np.random.Generator) -> Assignment:
    mechanism = Mechanism(mechanism)
    return Assignment(draw_assignment_matrix(design, mechanism, rng, 1)[0], mechanism)


def assignment_count(design: Design, mechanism: Mechanism | str = Mechanism.BLOCKED) -> int:
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.COMPLETE:
        return math.comb(design.n, design.n_t)
    return math.prod(math.comb(s, t) for s, t in zip(design.n_k, design.n_tk))


def _check_cap(design: Design, mechanism: Mechanism, cap: int) -> int:
    count = assignment_count(design, mechanism)
    if count > cap:
        raise EnumerationCapExceeded(
            f"{count} assignments exceed the enumeration cap of {cap}; use mode 'sampled' (Monte Carlo)"
        )
    return count


def iter_assignment_batches(
    design: Design,
    mechanism: Mechanism | str = Mechanism.BLOCKED,
    batch_size: int = CHUNK_SIZE,
    cap: int = ENUMERATION_CAP,
) -> Iterator[np.ndarray]:
    """Every valid assignment exactly once, as bool matrices of at most batch_size rows."""
    mechanism = Mechanism(mechanism)
    _check_cap(design, mechanism, cap)
    groups = _groups(design, mechanism)
    choices = [[units[list(c)] for c in itertools.combinations(range(len(units)), n_t)] for units, n_t in groups]
    batch = []
    for combo in itertools.product(*choices):
        row = np.zeros(design.n, dtype=bool)
        for treated_units in combo:
            row[treated_units] = True
        batch.append(row)
        if len(batch) == batch_size:
            yield np.stack(batch)
            batch = []
    if batch:
        yield np.stack(batch)


def enumerate_assignments(
    design: Design,
    mechanism: Mechanism | str = Mechanism.BLOCKED,
    cap: int = ENUMERATION_CAP,
) -> Iterator[Assignment]:
    mechanism = Mechanism(mechanism)
    for batch in iter_assignment_batches(design, mechanism, CHUNK_SIZE, cap):
        for row in batch:
            yield Assignment(row, mechanism)
