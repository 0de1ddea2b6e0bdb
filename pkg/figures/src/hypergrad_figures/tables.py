"""Schema-checked readers for the CSV files the experiment commands emit.

Two shapes arrive here: tables (`# schema=v1` comment, header row, data
rows — dataset-interchange files skip the comment) and matrices (the schema
comment followed by bare float rows).  Readers never modify the files and
fail with messages that name the offending file and column.
"""

import csv
from pathlib import Path

import numpy as np

from .errors import SchemaError

SCHEMA_LINE = "# schema=v1"


def _lines(path: Path) -> list[list[str]]:
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _check_schema_comment(path: Path, lines: list[list[str]]) -> list[list[str]]:
    """Validate a leading schema comment if one is present, then drop all
    comment rows.  Files without any comment (dataset interchange) pass."""
    if lines and lines[0] and lines[0][0].startswith("#"):
        declared = lines[0][0].strip()
        if declared != SCHEMA_LINE:
            raise SchemaError(
                f"{path} declares {declared!r}; this tool reads {SCHEMA_LINE!r}"
            )
    return [row for row in lines if row and not row[0].startswith("#")]


def read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    """(header, rows as dicts of strings); empty data is an error."""
    path = Path(path)
    rows = _check_schema_comment(path, _lines(path))
    if not rows:
        raise SchemaError(f"{path} has no header row")
    header = rows[0]
    if len(rows) == 1:
        raise SchemaError(f"{path} has no data rows")
    return header, [dict(zip(header, r)) for r in rows[1:]]


def read_matrix(path) -> np.ndarray:
    """Dense float matrix from bare comma-separated rows."""
    path = Path(path)
    rows = _check_schema_comment(path, _lines(path))
    if not rows:
        raise SchemaError(f"{path} has no data rows")
    try:
        mat = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as err:
        raise SchemaError(f"{path} is not a numeric matrix: {err}") from None
    return mat


def require_columns(path, header: list[str], needed: list[str]) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(
            f"{Path(path)} is missing required column(s) "
            + ", ".join(repr(c) for c in missing)
            + f"; found {header}"
        )


def column_floats(path, rows: list[dict[str, str]], name: str) -> np.ndarray:
    try:
        return np.array([float(r[name]) for r in rows], dtype=np.float64)
    except ValueError as err:
        raise SchemaError(f"{Path(path)}: column {name!r} is not numeric: {err}") from None
