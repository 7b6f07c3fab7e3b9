"""
Science tables (both potential outcomes per unit) and blocked designs.

Blocks are ordered lexicographically by label; `codes` maps each unit to its
block position in that order.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from data_ingest.records import ScienceUnit
from utils.errors import ValidationError


class Mechanism(str, Enum):
    COMPLETE = "complete"
    BLOCKED = "blocked"


def _block_s2(values: np.ndarray, codes: np.ndarray, K: int) -> np.ndarray:
    """Per-block sample variance with the (n_k - 1) divisor; NaN for singleton blocks."""
    out = np.full(K, np.nan)
    for k in range(K):
        v = values[codes == k]
        if len(v) >= 2:
            m = math.fsum(v) / len(v)
            out[k] = math.fsum((v - m) ** 2) / (len(v) - 1)
    return out


def _s2(values: np.ndarray) -> float:
    if len(values) < 2:
        return float("nan")
    m = math.fsum(values) / len(values)
    return math.fsum((values - m) ** 2) / (len(values) - 1)


@dataclass(frozen=True)
class ScienceTable:
    units: tuple[ScienceUnit, ...]

    def __post_init__(self):
        if len(self.units) == 0:
            raise ValidationError("science table has no units")

    @classmethod
    def from_arrays(cls, block_ids: Sequence[str], y0, y1) -> "ScienceTable":
        y0 = np.asarray(y0, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        if not (len(block_ids) == len(y0) == len(y1)):
            raise ValidationError("block_ids, y0 and y1 must have equal length")
        return cls(tuple(ScienceUnit(str(b), float(a), float(c)) for b, a, c in zip(block_ids, y0, y1)))

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({u.block_id for u in self.units}))

    @cached_property
    def codes(self) -> np.ndarray:
        index = {label: k for k, label in enumerate(self.labels)}
        return np.array([index[u.block_id] for u in self.units], dtype=np.int64)

    @cached_property
    def y0(self) -> np.ndarray:
        return np.array([u.y0 for u in self.units], dtype=float)

    @cached_property
    def y1(self) -> np.ndarray:
        return np.array([u.y1 for u in self.units], dtype=float)

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def K(self) -> int:
        return len(self.labels)

    @cached_property
    def n_k(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.K).astype(np.int64)

    @property
    def weights(self) -> np.ndarray:
        return self.n_k / self.n

    def outcomes(self, arm: str) -> np.ndarray:
        if arm == "t":
            return self.y1
        if arm == "c":
            return self.y0
        raise ValueError(f"arm must be 't' or 'c', got {arm!r}")

    # --- means ---
    def mean(self, arm: str) -> float:
        return math.fsum(self.outcomes(arm)) / self.n

    def block_means(self, arm: str) -> np.ndarray:
        y = self.outcomes(arm)
        return np.array([math.fsum(y[self.codes == k]) / self.n_k[k] for k in range(self.K)])

    @cached_property
    def effects(self) -> np.ndarray:
        return self.y1 - self.y0

    @property
    def tau(self) -> float:
        """Sample average treatment effect."""
        return math.fsum(self.effects) / self.n

    @cached_property
    def tau_k(self) -> np.ndarray:
        return np.array([math.fsum(self.effects[self.codes == k]) / self.n_k[k] for k in range(self.K)])

    # --- variances ---
    def s2(self, arm: str) -> float:
        return _s2(self.outcomes(arm))

    def block_s2(self, arm: str) -> np.ndarray:
        return _block_s2(self.outcomes(arm), self.codes, self.K)

    @property
    def s2_tc(self) -> float:
        return _s2(self.effects)

    @cached_property
    def block_s2_tc(self) -> np.ndarray:
        return _block_s2(self.effects, self.codes, self.K)

    def subset(self, labels: Sequence[str]) -> "ScienceTable":
        keep = set(labels)
        return ScienceTable(tuple(u for u in self.units if u.block_id in keep))


@dataclass(frozen=True)
class Design:
    """Per-block sizes and treated counts, optionally tied to a unit ordering."""

    labels: tuple[str, ...]
    n_k: tuple[int, ...]
    n_tk: tuple[int, ...]
    unit_codes: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (len(self.labels) == len(self.n_k) == len(self.n_tk)):
            raise ValidationError("design labels, sizes and treated counts must have equal length")
        if len(self.labels) == 0:
            raise ValidationError("design has no blocks")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("design has duplicate block labels")
        for label, size, treated in zip(self.labels, self.n_k, self.n_tk):
            if not 1 <= treated <= size - 1:
                raise ValidationError(
                    f"block {label}: treated count must be between 1 and n_k - 1, got {treated} of {size}"
                )
        if self.unit_codes is not None:
            counts = np.bincount(np.asarray(self.unit_codes), minlength=self.K)
            if tuple(int(c) for c in counts) != tuple(self.n_k):
                raise ValidationError("unit codes do not match block sizes")

    # --- constructors ---
    @classmethod
    def from_counts(cls, sizes: Mapping[str, int], treated: Mapping[str, int]) -> "Design":
        labels = tuple(sorted(sizes))
        missing = set(labels) ^ set(treated)
        if missing:
            raise ValidationError(f"treated counts missing or unexpected for blocks {sorted(missing)}")
        return cls(labels, tuple(int(sizes[b]) for b in labels), tuple(int(treated[b]) for b in labels))

    @classmethod
    def from_science(
        cls,
        science: ScienceTable,
        treated: Mapping[str, int] | None = None,
        p: Fraction | float | str | None = None,
    ) -> "Design":
        """Design over the science table's blocks, from explicit counts or one exact proportion."""
        if (treated is None) == (p is None):
            raise ValidationError("give exactly one of treated counts or a treated proportion")
        n_k = tuple(int(x) for x in science.n_k)
        if p is not None:
            try:
                frac = p if isinstance(p, Fraction) else Fraction(str(p))
            except (ValueError, ZeroDivisionError) as e:
                raise ValidationError(f"treated proportion must be a number or fraction, got {p!r}") from e
            if not 0 < frac < 1:
                raise ValidationError(f"treated proportion must be in (0, 1), got {p}")
            counts = []
            for label, size in zip(science.labels, n_k):
                t = frac * size
                if t.denominator != 1:
                    raise ValidationError(f"block {label}: proportion {p} of {size} units is not a whole number")
                counts.append(int(t))
            n_tk = tuple(counts)
        else:
            unknown = set(treated) - set(science.labels)
            missing = set(science.labels) - set(treated)
            if unknown or missing:
                raise ValidationError(
                    f"design does not match science blocks: missing={sorted(missing)} unexpected={sorted(unknown)}"
                )
            n_tk = tuple(int(treated[b]) for b in science.labels)
        return cls(science.labels, n_k, n_tk, tuple(int(c) for c in science.codes))

    # --- derived ---
    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return sum(self.n_k)

    @property
    def n_t(self) -> int:
        return sum(self.n_tk)

    @property
    def n_c(self) -> int:
        return self.n - self.n_t

    @property
    def n_ck(self) -> tuple[int, ...]:
        return tuple(s - t for s, t in zip(self.n_k, self.n_tk))

    @property
    def sizes(self) -> np.ndarray:
        return np.array(self.n_k, dtype=np.int64)

    @property
    def treated_counts(self) -> np.ndarray:
        return np.array(self.n_tk, dtype=np.int64)

    @property
    def codes(self) -> np.ndarray:
        """Block position per unit; contiguous blocks when no unit ordering was attached."""
        if self.unit_codes is not None:
            return np.asarray(self.unit_codes, dtype=np.int64)
        return np.repeat(np.arange(self.K, dtype=np.int64), self.n_k)

    @property
    def p_k(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(t, s) for s, t in zip(self.n_k, self.n_tk))

    @property
    def p_k_equal(self) -> bool:
        return proportions_equal(self.n_k, self.n_tk)

    @property
    def p(self) -> Fraction:
        """Overall treated proportion n_t / n."""
        return Fraction(self.n_t, self.n)

    @property
    def big(self) -> np.ndarray:
        return np.array([t >= 2 and c >= 2 for t, c in zip(self.n_tk, self.n_ck)], dtype=bool)

    def check_matches(self, science: ScienceTable) -> None:
        if self.labels != science.labels or tuple(int(x) for x in science.n_k) != tuple(self.n_k):
            raise ValidationError(
                f"design blocks {list(zip(self.labels, self.n_k))} do not match science blocks "
                f"{list(zip(science.labels, (int(x) for x in science.n_k)))}"
            )
        if self.unit_codes is not None and not np.array_equal(self.codes, science.codes):
            raise ValidationError("design unit ordering does not match the science table")


def proportions_equal(n_k: Sequence[int], n_tk: Sequence[int]) -> bool:
    """Exact p_k equality by integer cross-multiplication."""
    n0, t0 = int(n_k[0]), int(n_tk[0])
    return all(int(t) * n0 == t0 * int(s) for s, t in zip(n_k, n_tk))
