"""
Weights for the unified small-block variance estimator.

a_k = n_k^2 / ((n - 2 n_k) (n + sum_i n_i^2 / (n - 2 n_i))),  C = sum_k a_k.

Block sizes are integers, so the weights are computed exactly with Fractions and
converted to float once.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from utils.errors import EstimatorNotApplicable


@dataclass(frozen=True, eq=False)
class SbpWeights:
    a_k: np.ndarray
    C: float


@lru_cache(maxsize=256)
def _exact_weights(sizes: tuple[int, ...]) -> tuple[tuple[Fraction, ...], Fraction]:
    K = len(sizes)
    n = sum(sizes)
    if K < 2:
        raise EstimatorNotApplicable(f"half-size guard violated: a single block makes up all {n} units")
    if K == 2 and sizes[0] == sizes[1]:
        # two blocks of exactly half: the closed form is 0/0, its equal-size limit is 1/(K(K-1))
        half = Fraction(1, 2)
        return (half, half), Fraction(1)
    for s in sizes:
        if 2 * s >= n:
            raise EstimatorNotApplicable(f"half-size guard violated: block of size {s} in {n} units")
    ratios = [Fraction(s * s, n - 2 * s) for s in sizes]
    denom = n + sum(ratios)
    a = tuple(r / denom for r in ratios)
    return a, sum(ratios) / denom


def sbp_weights(sizes: Sequence[int]) -> SbpWeights:
    a, C = _exact_weights(tuple(int(s) for s in sizes))
    return SbpWeights(a_k=np.array([float(x) for x in a]), C=float(C))


def sbp_weights_exact(sizes: Sequence[int]) -> tuple[tuple[Fraction, ...], Fraction]:
    """The same weights as Fractions."""
    return _exact_weights(tuple(int(s) for s in sizes))
