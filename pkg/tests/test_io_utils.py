"""
Atomic publishing, the success marker and file reading.
"""

import pandas as pd
import pytest

from utils.errors import ValidationError
from utils.io_utils import atomic_write_csv, atomic_write_text, read_text, write_success_marker


def test_marker_is_a_file_next_to_the_output(tmp_path):
    out = tmp_path / "run" / "results.csv"
    atomic_write_csv(pd.DataFrame({"estimator": ["hybrid-p"], "rel_bias": [0.1]}), str(out))
    marker = write_success_marker(str(out))
    assert out.is_file()
    assert (tmp_path / "run" / "_SUCCESS").is_file()
    assert marker == str(tmp_path / "run" / "_SUCCESS")
    # a second run replaces the marker in place
    write_success_marker(str(out))
    assert sorted(p.name for p in (tmp_path / "run").iterdir()) == ["_SUCCESS", "results.csv"]


def test_extensionless_destination_is_written_as_a_file(tmp_path):
    dst = tmp_path / "reports" / "latest"
    atomic_write_text("ok\n", str(dst))
    assert dst.is_file()
    assert dst.read_text(encoding="utf-8") == "ok\n"


def test_read_text_rejects_other_encodings(tmp_path):
    path = tmp_path / "config.json"
    path.write_bytes('{"label": "café"}'.encode("latin-1"))
    with pytest.raises(ValidationError, match="not valid UTF-8"):
        read_text(str(path))
