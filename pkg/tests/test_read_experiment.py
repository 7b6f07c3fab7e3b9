"""
CSV readers: experiment, science and design files, with line-numbered errors.
"""

import os

import pytest

from data_ingest.read_experiment import (
    parse_design_csv,
    parse_experiment_csv,
    parse_science_csv,
    read_experiment_file,
)
from data_ingest.records import Arm
from tests.conftest import EXAMPLES
from utils.errors import ParseError, ValidationError


def test_reads_example_experiment():
    """The bundled matched-pairs example parses in file order."""
    table = read_experiment_file(os.path.join(EXAMPLES, "two_pairs.csv"))
    assert len(table) == 4
    assert [r.unit_id for r in table] == ["1", "2", "3", "4"]
    assert table.records[0].arm is Arm.TREATED
    assert table.y_obs.tolist() == [3.0, 2.0, 5.0, 2.0]


def test_byte_order_mark_and_blank_lines_are_ignored():
    table = parse_experiment_csv("\ufeffunit_id,block,z,y\n1,A,1,3\n\n2,A,0,2\n")
    assert len(table) == 2


def test_bytes_input_must_be_utf8():
    with pytest.raises(ValidationError, match="UTF-8"):
        parse_experiment_csv(b"unit_id,block,z,y\n1,A,1,\xff\n")


@pytest.mark.parametrize(
    "text, message, line",
    [
        ("unit_id,block,z,y\n1,A,1,3\n2,A,2,2\n", "invalid treatment code", 3),
        ("unit_id,block,z,y\n1,A,1,abc\n", "non-numeric outcome", 2),
        ("unit_id,block,z,y\n1,A,1,3\n2,A,0,inf\n", "non-finite outcome", 3),
        ("unit_id,block,z,y\n1,A,1,nan\n", "non-finite outcome", 2),
        ("unit_id,block,z,y\n1,,1,3\n", "missing block", 2),
        ("unit_id,block,z,y\n1,A,1,3\n2,A,0\n", "wrong column count", 3),
        ("id,block,z,y\n1,A,1,3\n", "expected header", 1),
    ],
)
def test_bad_rows_name_the_line(text, message, line):
    with pytest.raises(ParseError) as err:
        parse_experiment_csv(text)
    assert message in str(err.value)
    assert err.value.line == line, f"expected line {line}, got {err.value.line}"


def test_duplicate_unit_id():
    with pytest.raises(ValidationError, match="duplicate unit_id '1', line 3"):
        parse_experiment_csv("unit_id,block,z,y\n1,A,1,3\n1,A,0,2\n")


@pytest.mark.parametrize("text", ["", "   \n", "unit_id,block,z,y\n"])
def test_empty_input(text):
    with pytest.raises(ValidationError, match="empty file"):
        parse_experiment_csv(text)


def test_science_file():
    science = parse_science_csv("block,y0,y1\nB,1,2\nA,0,1\nA,2,5\nB,3,3\n")
    assert science.labels == ("A", "B")
    assert science.n_k.tolist() == [2, 2]
    assert science.tau_k.tolist() == [2.0, 0.5]
    assert science.tau == pytest.approx(1.25)


def test_design_file():
    assert parse_design_csv("block,n_t\nA,1\nB,2\n") == {"A": 1, "B": 2}
    with pytest.raises(ParseError, match="non-negative integer, line 3"):
        parse_design_csv("block,n_t\nA,1\nB,1.5\n")
    with pytest.raises(ValidationError, match="duplicate block"):
        parse_design_csv("block,n_t\nA,1\nA,2\n")
