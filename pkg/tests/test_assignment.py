"""
Assignment draws and exhaustive enumeration.
"""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from oracle.science import Design, Mechanism
from simulate.assignment import (
    assignment_count,
    draw_assignment,
    draw_assignment_matrix,
    enumerate_assignments,
    iter_assignment_batches,
    replication_rng,
)
from utils.errors import EnumerationCapExceeded


@pytest.fixture
def design():
    return Design(("A", "B", "C"), (2, 3, 4), (1, 1, 2))


def test_draws_respect_block_counts(design):
    rng = np.random.default_rng(1)
    T = draw_assignment_matrix(design, Mechanism.BLOCKED, rng, 500)
    for k, (start, stop) in enumerate([(0, 2), (2, 5), (5, 9)]):
        assert np.all(T[:, start:stop].sum(axis=1) == design.n_tk[k])
    complete = draw_assignment_matrix(design, "complete", rng, 500)
    assert np.all(complete.sum(axis=1) == design.n_t)
    one = draw_assignment(design, Mechanism.BLOCKED, rng)
    assert one.treated_counts(design).tolist() == [1, 1, 2]


def test_counts(design):
    assert assignment_count(design) == 2 * 3 * 6
    assert assignment_count(design, Mechanism.COMPLETE) == math.comb(9, 4)


def test_enumeration_visits_each_assignment_once(design):
    rows = np.concatenate(list(iter_assignment_batches(design, Mechanism.BLOCKED, batch_size=7)))
    assert rows.shape == (36, 9)
    assert len({r.tobytes() for r in rows}) == 36
    complete = enumerate_assignments(design, Mechanism.COMPLETE)
    assert len({a.treated.tobytes() for a in complete}) == math.comb(9, 4)


def test_draws_are_uniform(design):
    """Chi-square goodness of fit over the 36 blocked assignments."""
    index = {a.treated.tobytes(): i for i, a in enumerate(enumerate_assignments(design))}
    T = draw_assignment_matrix(design, Mechanism.BLOCKED, np.random.default_rng(2), 36_000)
    counts = np.bincount([index[r.tobytes()] for r in T], minlength=36)
    assert chisquare(counts).pvalue > 1e-4


def test_cap(design):
    with pytest.raises(EnumerationCapExceeded, match="use mode 'sampled'"):
        list(iter_assignment_batches(design, Mechanism.COMPLETE, cap=100))


def test_streams_depend_only_on_seed_and_replication():
    a = replication_rng(42, 7).random(5)
    b = replication_rng(42, 7).random(5)
    c = replication_rng(42, 8).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
