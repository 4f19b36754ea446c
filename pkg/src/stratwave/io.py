"""CSV ingestion, table writing, and display rendering.

The file contract is plain RFC-4180 CSV with a header row. Column types
are inferred per column over the non-missing cells: integer, then real,
then text. A missing cell is an empty field or the literal ``NA`` (which
means a text value "NA" cannot round-trip; it reads back as missing).
An integer column that contains missing cells comes back as real, since
the missing marker has no integer representation.

Display rendering is separate from file writing on purpose: files keep
full precision, while rendered tables round floats to two decimals using
decimal half-even rounding on the shortest decimal form of the value.
That is the convention under which 13/40 prints as 0.32 and 0.375 as
0.38.
"""

from __future__ import annotations

import csv
import io as _stdlib_io
import math
import re
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    ColumnNotFound,
    DataError,
    DuplicateId,
    MissingValues,
    ParseError,
)

__all__ = [
    "read_units",
    "write_units",
    "parse_units_text",
    "render_table",
    "render_float",
    "build_model_matrix",
]

_MISSING = {"", "NA"}
_INT_RE = re.compile(r"[+-]?\d+")


def _infer_type(values: list[str]) -> str:
    saw_any = False
    all_int = True
    all_real = True
    for v in values:
        if v in _MISSING:
            continue
        saw_any = True
        if all_int and not _INT_RE.fullmatch(v):
            all_int = False
        if not all_int and all_real:
            try:
                if not math.isfinite(float(v)):
                    all_real = False
            except ValueError:
                all_real = False
        if not all_real:
            break
    if not saw_any:
        return "text"
    if all_int:
        return "integer"
    if all_real:
        return "real"
    return "text"


def _build_column(values: list[str], kind: str):
    if kind == "integer":
        if any(v in _MISSING for v in values):
            kind = "real"  # no integer representation for a missing cell
        else:
            try:
                return np.array([int(v) for v in values], dtype=np.int64)
            except OverflowError:
                return pd.array(values, dtype=object)  # wider than int64: keep text
    if kind == "real":
        return np.array(
            [np.nan if v in _MISSING else float(v) for v in values], dtype=float
        )
    return pd.array(
        [np.nan if v in _MISSING else v for v in values], dtype=object
    )


def parse_units_text(text: str, *, source: str = "<input>") -> pd.DataFrame:
    """Parse CSV text into a typed table; see the module docstring for
    the format contract."""
    reader = csv.reader(_stdlib_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: file is empty") from None
    except csv.Error as err:
        raise ParseError(f"{source}: line 1: {err}") from None
    if not header or all(h.strip() == "" for h in header):
        raise ParseError(f"{source}: header row is blank")
    seen = set()
    for name in header:
        if name in seen:
            raise ParseError(f"{source}: duplicate column name {name!r}")
        seen.add(name)
    rows: list[list[str]] = []
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as err:
            raise ParseError(f"{source}: line {reader.line_num}: {err}") from None
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"{source}: line {reader.line_num}: expected {len(header)} fields, "
                f"got {len(row)}"
            )
        rows.append(row)
    columns = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        columns[name] = _build_column(cells, _infer_type(cells))
    return pd.DataFrame(columns, columns=header)


def read_units(path, id_col: str | None = None) -> pd.DataFrame:
    """Read a unit table from a CSV file, optionally checking an id column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except UnicodeDecodeError as err:
        raise ParseError(f"{path.name}: not UTF-8 text: {err}") from None
    table = parse_units_text(text, source=path.name)
    if id_col is not None:
        if id_col not in table.columns:
            raise ColumnNotFound(f"{path.name}: no {id_col!r} column")
        ids = table[id_col]
        if ids.isna().any():
            raise MissingValues(f"{path.name}: id column {id_col!r} has missing values")
        if ids.duplicated().any():
            dupes = ids[ids.duplicated()].unique()
            raise DuplicateId(
                f"{path.name}: repeated ids: " + ", ".join(str(d) for d in dupes[:5])
            )
    return table


def _cell_text(value) -> str:
    if pd.isna(value):
        return ""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_units(table: pd.DataFrame, path) -> None:
    """Write a table as CSV, full precision, missing cells empty."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([str(c) for c in table.columns])
        for row in table.itertuples(index=False, name=None):
            writer.writerow([_cell_text(v) for v in row])


def render_float(value: float, precision: str = "2") -> str:
    """Float for display: two decimals under half-even rounding, or full."""
    if precision == "full":
        return repr(float(value))
    quantized = Decimal(repr(float(value))).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_EVEN
    )
    return str(quantized)


def render_table(table: pd.DataFrame, precision: str = "2") -> str:
    """Aligned text rendering of a table for terminal output."""
    if table.empty and table.shape[1] == 0:
        return "(empty table)\n"

    def display(value) -> str:
        if pd.isna(value):
            return "NA"
        if isinstance(value, np.generic):
            value = value.item()
        if isinstance(value, float):
            return render_float(value, precision)
        return str(value)

    names = [str(c) for c in table.columns]
    cells = [
        [display(v) for v in row]
        for row in table.itertuples(index=False, name=None)
    ]
    numeric = [pd.api.types.is_numeric_dtype(table[c]) for c in table.columns]
    widths = [
        max(len(names[j]), max((len(r[j]) for r in cells), default=0))
        for j in range(len(names))
    ]

    def line(parts: list[str]) -> str:
        out = []
        for j, part in enumerate(parts):
            out.append(part.rjust(widths[j]) if numeric[j] else part.ljust(widths[j]))
        return "  ".join(out).rstrip()

    rendered = [line(names)]
    rendered.extend(line(r) for r in cells)
    return "\n".join(rendered) + "\n"


def build_model_matrix(
    units: pd.DataFrame, covariates: list[str], *, intercept: bool = True
) -> pd.DataFrame:
    """Numeric model matrix from raw columns.

    Text columns expand to reference-level dummies: levels sorted, the
    first level dropped, indicator columns named ``<column>_<level>``.
    """
    if not covariates:
        raise DataError("at least one covariate is needed")
    pieces: dict[str, np.ndarray] = {}
    if intercept:
        pieces["intercept"] = np.ones(len(units))
    for col in covariates:
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
        series = units[col]
        if series.isna().any():
            raise MissingValues(f"covariate {col!r} has missing values")
        if pd.api.types.is_numeric_dtype(series):
            pieces[col] = series.to_numpy(dtype=float)
        else:
            levels = sorted(set(series.astype(str)))
            for level in levels[1:]:
                pieces[f"{col}_{level}"] = (
                    (series.astype(str) == level).to_numpy().astype(float)
                )
    return pd.DataFrame(pieces)
