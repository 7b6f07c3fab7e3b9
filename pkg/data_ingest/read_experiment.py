"""
Parse experiment and science-table CSV files:
- experiment: header unit_id,block,z,y (one observed unit per row)
- science:    header block,y0,y1 (both potential outcomes per unit)
- design:     header block,n_t (treated count per block)
Rows are validated with line-numbered errors (line 1 is the header).
"""

import io
import logging
import re

import numpy as np
import pandas as pd

from config import DESIGN_HEADER, EXPERIMENT_HEADER, SCIENCE_HEADER
from data_ingest.records import Arm, ExperimentTable, UnitRecord
from oracle.science import ScienceTable
from utils.errors import ParseError, ValidationError
from utils.io_utils import read_bytes

logger = logging.getLogger(__name__)


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ValidationError(f"input is not valid UTF-8: {e}") from e
    return text.lstrip("\ufeff")


def _read_frame(text, header: tuple[str, ...]) -> pd.DataFrame:
    """Read every field as a string and check the header; rows keep file line numbers."""
    text = _decode(text)
    if not text.strip():
        raise ValidationError("empty file")
    try:
        df = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            index_col=False,
            engine="python",
        )
    except pd.errors.EmptyDataError as e:
        raise ValidationError("empty file") from e
    except pd.errors.ParserError as e:
        # e.g. "Expected 4 fields in line 3, saw 5"
        m = re.search(r"line (\d+)", str(e))
        raise ParseError("wrong column count", int(m.group(1)) if m else None) from e

    columns = tuple(str(c).strip() for c in df.columns)
    if columns != header:
        raise ParseError(f"expected header {','.join(header)}, got {','.join(columns)}", 1)
    df.columns = list(header)
    df["_line"] = np.arange(len(df)) + 2

    # blank lines come through as rows with every field missing or empty
    blank = df[list(header)].apply(lambda col: col.isna() | (col.astype(str).str.strip() == "")).all(axis=1)
    df = df.loc[~blank].reset_index(drop=True)
    if df.empty:
        raise ValidationError("empty file: no data rows")
    return df


def _first_error(df: pd.DataFrame, checks: list[tuple[pd.Series, str]]) -> None:
    """Raise for the earliest line failing any check; checks are (bad_mask, message) in column order."""
    first = None
    for bad, message in checks:
        if bad.any():
            idx = int(np.flatnonzero(bad.to_numpy())[0])
            line = int(df["_line"].iloc[idx])
            if first is None or line < first[0]:
                first = (line, message)
    if first is not None:
        raise ParseError(first[1], first[0])


def _short_rows(df: pd.DataFrame, header: tuple[str, ...]) -> pd.Series:
    return df[list(header)].isna().any(axis=1)


def _numeric(col: pd.Series) -> tuple[pd.Series, pd.Series, pd.Series]:
    """Returns (values, non_numeric_mask, non_finite_mask)."""
    stripped = col.fillna("").astype(str).str.strip()
    values = pd.to_numeric(stripped, errors="coerce")
    non_numeric = values.isna() & ~stripped.str.lower().isin(["nan", "+nan", "-nan"])
    non_finite = ~non_numeric & ~np.isfinite(values.fillna(np.nan).to_numpy(dtype=float))
    return values, non_numeric, pd.Series(non_finite, index=col.index)


def parse_experiment_csv(text) -> ExperimentTable:
    df = _read_frame(text, EXPERIMENT_HEADER)
    short = _short_rows(df, EXPERIMENT_HEADER)
    unit_id = df["unit_id"].fillna("").astype(str).str.strip()
    block = df["block"].fillna("").astype(str).str.strip()
    z = df["z"].fillna("").astype(str).str.strip()
    y, non_numeric, non_finite = _numeric(df["y"])

    _first_error(
        df,
        [
            (short, "wrong column count"),
            (unit_id == "", "missing unit_id"),
            (block == "", "missing block"),
            (~z.isin(["0", "1"]), "invalid treatment code"),
            (non_numeric, "non-numeric outcome"),
            (non_finite, "non-finite outcome"),
        ],
    )

    dup = unit_id.duplicated()
    if dup.any():
        idx = int(np.flatnonzero(dup.to_numpy())[0])
        raise ValidationError(f"duplicate unit_id {unit_id.iloc[idx]!r}, line {int(df['_line'].iloc[idx])}")

    records = tuple(
        UnitRecord(u, b, Arm.TREATED if zz == "1" else Arm.CONTROL, float(v))
        for u, b, zz, v in zip(unit_id, block, z, y)
    )
    logger.info(f"Parsed {len(records)} units across {block.nunique()} blocks")
    return ExperimentTable(records)


def parse_science_csv(text) -> ScienceTable:
    df = _read_frame(text, SCIENCE_HEADER)
    short = _short_rows(df, SCIENCE_HEADER)
    block = df["block"].fillna("").astype(str).str.strip()
    y0, bad0, inf0 = _numeric(df["y0"])
    y1, bad1, inf1 = _numeric(df["y1"])
    _first_error(
        df,
        [
            (short, "wrong column count"),
            (block == "", "missing block"),
            (bad0 | bad1, "non-numeric outcome"),
            (inf0 | inf1, "non-finite outcome"),
        ],
    )
    return ScienceTable.from_arrays(block.tolist(), y0.to_numpy(dtype=float), y1.to_numpy(dtype=float))


def parse_design_csv(text) -> dict[str, int]:
    """Treated count per block label."""
    df = _read_frame(text, DESIGN_HEADER)
    block = df["block"].fillna("").astype(str).str.strip()
    raw = df["n_t"].fillna("").astype(str).str.strip()
    bad = ~raw.str.fullmatch(r"\d+")
    _first_error(
        df,
        [
            (_short_rows(df, DESIGN_HEADER), "wrong column count"),
            (block == "", "missing block"),
            (bad, "treated count must be a non-negative integer"),
        ],
    )
    dup = block.duplicated()
    if dup.any():
        raise ValidationError(f"duplicate block {block[dup].iloc[0]!r} in design file")
    return {b: int(t) for b, t in zip(block, raw)}


def read_experiment_file(path: str) -> ExperimentTable:
    return parse_experiment_csv(read_bytes(path))


def read_science_file(path: str) -> ScienceTable:
    return parse_science_csv(read_bytes(path))


def read_design_file(path: str) -> dict[str, int]:
    return parse_design_csv(read_bytes(path))
