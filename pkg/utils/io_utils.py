import json
import math
import os

import pandas as pd

from config import SIG_DIGITS, SUCCESS_MARK_NAME
from utils.errors import ValidationError


def ensure_dir(path):
    """Create the parent directory of a file path."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def atomic_write_text(text: str, dst_path: str) -> None:
    ensure_dir(dst_path)
    tmp_path = f"{dst_path}.tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp_path, dst_path)


def atomic_write_csv(df: pd.DataFrame, dst_path: str) -> None:
    ensure_dir(dst_path)
    tmp_path = f"{dst_path}.tmp"
    df.to_csv(tmp_path, index=False, float_format=f"%.{SIG_DIGITS}g", lineterminator="\n")
    os.replace(tmp_path, dst_path)


def write_success_marker(dst_path: str) -> str:
    """Drop a `_SUCCESS` file next to dst_path; returns the marker path."""
    marker = os.path.join(os.path.dirname(os.path.abspath(dst_path)), SUCCESS_MARK_NAME)
    atomic_write_text("ok\n", marker)
    return marker


def read_bytes(path: str) -> bytes:
    """Raw file contents; decoding is left to the parsers."""
    with open(path, "rb") as f:
        return f.read()


def read_text(path: str) -> str:
    """Read a UTF-8 file; OSError propagates, bad encoding is a ValidationError."""
    try:
        return read_bytes(path).decode("utf-8")
    except UnicodeDecodeError as e:
        raise ValidationError(f"{path} is not valid UTF-8: {e}") from e


def round_sig(x, digits: int = SIG_DIGITS):
    """Round to `digits` significant digits; None and non-finite values pass through."""
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def to_jsonable(obj):
    """Recursively round floats for JSON output."""
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if hasattr(obj, "item"):  # numpy scalars
        return to_jsonable(obj.item())
    value = round_sig(obj)
    return value if math.isfinite(value) else None


def dumps_report(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"
