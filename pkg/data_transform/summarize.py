"""
Per-block summaries of an observed experiment.

`block_arrays` is the single code path computing per-block counts, arm means and
within-arm sums of squares. It accepts a batch of assignments (leading replication
axis) so the simulators evaluate many assignments at once; `summarize` calls it
with one row.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd

from data_ingest.records import ExperimentTable
from oracle.science import proportions_equal
from utils.errors import ValidationError

logger = logging.getLogger(__name__)


class BlockClass(str, Enum):
    BIG = "big"
    SMALL = "small"


@dataclass(frozen=True, eq=False)
class BlockArrays:
    """Per-block statistics; stat arrays have shape (..., K)."""

    labels: tuple[str, ...]
    n_k: np.ndarray
    n_tk: np.ndarray
    mean_t: np.ndarray
    mean_c: np.ndarray
    ss_t: np.ndarray
    ss_c: np.ndarray

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def n(self) -> int:
        return int(self.n_k.sum())

    @property
    def n_ck(self) -> np.ndarray:
        return self.n_k - self.n_tk

    @property
    def n_t(self) -> int:
        return int(self.n_tk.sum())

    @property
    def n_c(self) -> int:
        return int(self.n_ck.sum())

    @property
    def weights(self) -> np.ndarray:
        return self.n_k / self.n

    @property
    def big(self) -> np.ndarray:
        return (self.n_tk >= 2) & (self.n_ck >= 2)

    @property
    def tau_hat(self) -> np.ndarray:
        return self.mean_t - self.mean_c

    @property
    def s2_t(self) -> np.ndarray:
        return _sample_variance(self.ss_t, self.n_tk)

    @property
    def s2_c(self) -> np.ndarray:
        return _sample_variance(self.ss_c, self.n_ck)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.mean_t.shape[:-1]

    def subset(self, mask) -> "BlockArrays":
        mask = np.asarray(mask, dtype=bool)
        return BlockArrays(
            labels=tuple(label for label, keep in zip(self.labels, mask) if keep),
            n_k=self.n_k[mask],
            n_tk=self.n_tk[mask],
            mean_t=self.mean_t[..., mask],
            mean_c=self.mean_c[..., mask],
            ss_t=self.ss_t[..., mask],
            ss_c=self.ss_c[..., mask],
        )

    @classmethod
    def placeholder(cls, labels: Sequence[str], n_k, n_tk) -> "BlockArrays":
        """All-zero statistics for a design; used to probe estimator applicability."""
        K = len(labels)
        zeros = np.zeros(K)
        return cls(tuple(labels), np.asarray(n_k, dtype=np.int64), np.asarray(n_tk, dtype=np.int64),
                   zeros, zeros.copy(), zeros.copy(), zeros.copy())


def _sample_variance(ss: np.ndarray, count: np.ndarray) -> np.ndarray:
    # (count - 1) divisor; undefined for singleton arms
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(count >= 2, ss / np.maximum(count - 1, 1), np.nan)


def block_arrays(Y, T, codes, n_k, n_tk, labels: Sequence[str]) -> BlockArrays:
    """
    Per-block statistics of outcomes Y under treatment indicators T.

    Y, T: shape (..., n); codes: block position per unit; n_k, n_tk: per-block sizes
    and treated counts shared by every row of the batch.
    """
    Y = np.asarray(Y, dtype=float)
    T = np.asarray(T, dtype=bool)
    codes = np.asarray(codes, dtype=np.int64)
    n_k = np.asarray(n_k, dtype=np.int64)
    n_tk = np.asarray(n_tk, dtype=np.int64)
    n_ck = n_k - n_tk
    if np.any(n_tk < 1) or np.any(n_ck < 1):
        bad = labels[int(np.flatnonzero((n_tk < 1) | (n_ck < 1))[0])]
        raise ValidationError(f"no overlap in block {bad}")

    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    starts = np.concatenate(([0], np.cumsum(n_k)[:-1]))
    Ys = Y[..., order]
    Tf = T[..., order].astype(float)
    Cf = 1.0 - Tf

    mean_t = np.add.reduceat(Ys * Tf, starts, axis=-1) / n_tk
    mean_c = np.add.reduceat(Ys * Cf, starts, axis=-1) / n_ck
    # two-pass within-arm sums of squares
    dev_t = (Ys - mean_t[..., sorted_codes]) * Tf
    dev_c = (Ys - mean_c[..., sorted_codes]) * Cf
    ss_t = np.add.reduceat(dev_t * dev_t, starts, axis=-1)
    ss_c = np.add.reduceat(dev_c * dev_c, starts, axis=-1)
    return BlockArrays(tuple(labels), n_k, n_tk, mean_t, mean_c, ss_t, ss_c)


@dataclass(frozen=True)
class BlockSummary:
    block_id: str
    n_k: int
    n_tk: int
    n_ck: int
    mean_t: float
    mean_c: float
    s2_t: float | None
    s2_c: float | None
    tau_hat: float
    block_class: BlockClass


@dataclass(frozen=True)
class SizeGroup:
    m: int          # block size
    count: int      # K_j, small blocks of this size
    units: int      # N_j = m * K_j


@dataclass(frozen=True, eq=False)
class ExperimentSummary:
    blocks: tuple[BlockSummary, ...]
    arrays: BlockArrays

    @property
    def n(self) -> int:
        return self.arrays.n

    @property
    def n_t(self) -> int:
        return self.arrays.n_t

    @property
    def n_c(self) -> int:
        return self.arrays.n_c

    @property
    def K(self) -> int:
        return len(self.blocks)

    @property
    def n_small(self) -> int:
        return sum(b.n_k for b in self.blocks if b.block_class is BlockClass.SMALL)

    @property
    def size_groups(self) -> tuple[SizeGroup, ...]:
        return size_groups([b.n_k for b in self.blocks if b.block_class is BlockClass.SMALL])

    @property
    def J(self) -> int:
        return len(self.size_groups)

    @property
    def p_k_equal(self) -> bool:
        return proportions_equal([b.n_k for b in self.blocks], [b.n_tk for b in self.blocks])

    def block(self, block_id: str) -> BlockSummary:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise KeyError(block_id)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "block": b.block_id,
                    "n_k": b.n_k,
                    "n_tk": b.n_tk,
                    "n_ck": b.n_ck,
                    "mean_t": b.mean_t,
                    "mean_c": b.mean_c,
                    "s2_t": b.s2_t,
                    "s2_c": b.s2_c,
                    "tau_hat": b.tau_hat,
                    "class": b.block_class.value,
                }
                for b in self.blocks
            ]
        )


def size_groups(sizes: Sequence[int]) -> tuple[SizeGroup, ...]:
    counts = Counter(int(s) for s in sizes)
    return tuple(SizeGroup(m, k, m * k) for m, k in sorted(counts.items()))


def summary_from_arrays(arrays: BlockArrays) -> ExperimentSummary:
    if arrays.batch_shape != ():
        raise ValueError("summary_from_arrays expects a single assignment")
    s2_t, s2_c = arrays.s2_t, arrays.s2_c
    blocks = []
    for k, label in enumerate(arrays.labels):
        t, c = int(arrays.n_tk[k]), int(arrays.n_ck[k])
        blocks.append(
            BlockSummary(
                block_id=label,
                n_k=int(arrays.n_k[k]),
                n_tk=t,
                n_ck=c,
                mean_t=float(arrays.mean_t[k]),
                mean_c=float(arrays.mean_c[k]),
                s2_t=float(s2_t[k]) if t >= 2 else None,
                s2_c=float(s2_c[k]) if c >= 2 else None,
                tau_hat=float(arrays.tau_hat[k]),
                block_class=BlockClass.BIG if (t >= 2 and c >= 2) else BlockClass.SMALL,
            )
        )
    return ExperimentSummary(tuple(blocks), arrays)


def summarize(table: ExperimentTable) -> ExperimentSummary:
    if len(table) == 0:
        raise ValidationError("experiment table has no units")
    labels, codes = np.unique(table.block_ids.astype(str), return_inverse=True)
    labels = tuple(str(x) for x in labels)
    treated = table.treated
    K = len(labels)
    n_k = np.bincount(codes, minlength=K)
    n_tk = np.bincount(codes, weights=treated.astype(float), minlength=K).astype(np.int64)
    arrays = block_arrays(table.y_obs, treated, codes, n_k, n_tk, labels)
    summary = summary_from_arrays(arrays)
    logger.info(
        f"Summarized {summary.n} units in {summary.K} blocks "
        f"({summary.K - sum(1 for b in summary.blocks if b.block_class is BlockClass.SMALL)} big, "
        f"n_small={summary.n_small})"
    )
    return summary


def classify_blocks(summary: ExperimentSummary) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(big block ids, small block ids), each in label order."""
    big = tuple(b.block_id for b in summary.blocks if b.block_class is BlockClass.BIG)
    small = tuple(b.block_id for b in summary.blocks if b.block_class is BlockClass.SMALL)
    return big, small
