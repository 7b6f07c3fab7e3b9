"""
Record types for observed experiments and science tables.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np
import pandas as pd

from utils.errors import ValidationError


class Arm(str, Enum):
    TREATED = "treated"
    CONTROL = "control"


@dataclass(frozen=True)
class UnitRecord:
    unit_id: str
    block_id: str
    arm: Arm
    y_obs: float

    def __post_init__(self):
        if not isinstance(self.arm, Arm):
            raise ValidationError(f"unit {self.unit_id}: arm must be treated or control, got {self.arm!r}")
        if not math.isfinite(self.y_obs):
            raise ValidationError(f"unit {self.unit_id}: outcome must be finite, got {self.y_obs}")


@dataclass(frozen=True)
class ScienceUnit:
    block_id: str
    y0: float
    y1: float

    def __post_init__(self):
        if not (math.isfinite(self.y0) and math.isfinite(self.y1)):
            raise ValidationError(f"block {self.block_id}: potential outcomes must be finite")


@dataclass(frozen=True)
class ExperimentTable:
    """Observed data, one record per unit, in file order."""

    records: tuple[UnitRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[UnitRecord]:
        return iter(self.records)

    @property
    def block_ids(self) -> np.ndarray:
        return np.array([r.block_id for r in self.records], dtype=object)

    @property
    def treated(self) -> np.ndarray:
        return np.array([r.arm is Arm.TREATED for r in self.records], dtype=bool)

    @property
    def y_obs(self) -> np.ndarray:
        return np.array([r.y_obs for r in self.records], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "unit_id": [r.unit_id for r in self.records],
                "block": [r.block_id for r in self.records],
                "z": self.treated.astype(int),
                "y": self.y_obs,
            }
        )

    @classmethod
    def from_rows(cls, rows) -> "ExperimentTable":
        """Build from (unit_id, block, z, y) tuples; handy in tests and scripts."""
        records = []
        for unit_id, block_id, z, y in rows:
            if int(z) not in (0, 1):
                raise ValidationError(f"unit {unit_id}: invalid treatment code {z}")
            arm = Arm.TREATED if int(z) == 1 else Arm.CONTROL
            records.append(UnitRecord(str(unit_id), str(block_id), arm, float(y)))
        return cls(tuple(records))
