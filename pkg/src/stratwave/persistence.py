"""Saving and loading workflow documents.

A workflow file is a single JSON document: version, overall metadata,
and the phase/wave tree with every table inlined as
``{columns, types, data}`` where types are ``integer``, ``real``, or
``text`` and missing cells are null. Tables are stored by position, so
a document loads with plain row numbering regardless of how its frames
were indexed in memory.

Very large tables (100,000 rows and up) move to side-car CSV files next
to the workflow file and are referenced by relative name, keeping the
main document reviewable. Saving takes an advisory lock beside the file
so two writers cannot interleave; the write itself goes through a
temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from filelock import FileLock

from .errors import DataError, ParseError
from .workflow import Phase, Wave, WorkflowDoc

__all__ = ["save_workflow", "load_workflow", "SIDECAR_ROWS"]

SIDECAR_ROWS = 100_000
_FORMAT_VERSION = 1


def _column_type(dtype) -> str:
    if dtype.kind in "iub":
        return "integer"
    if dtype.kind == "f":
        return "real"
    return "text"


def _encode_cell(value, kind: str):
    if pd.isna(value):
        return None
    if kind == "integer":
        return int(value)
    if kind == "real":
        return float(value)
    return str(value)


def _encode_table(frame: pd.DataFrame, sidecar: Path | None) -> dict:
    columns = [str(c) for c in frame.columns]
    types = [_column_type(frame[c].dtype) for c in frame.columns]
    if sidecar is not None and len(frame) >= SIDECAR_ROWS:
        frame.to_csv(sidecar, index=False)
        return {"columns": columns, "types": types, "ref": sidecar.name}
    data = [
        [_encode_cell(v, k) for v, k in zip(row, types)]
        for row in frame.itertuples(index=False, name=None)
    ]
    return {"columns": columns, "types": types, "data": data}


def _decode_column(values: list, kind: str):
    if kind == "integer":
        if any(v is None for v in values):
            return pd.array(values, dtype="Int64")
        return np.array(values, dtype=np.int64)
    if kind == "real":
        return np.array(
            [np.nan if v is None else float(v) for v in values], dtype=float
        )
    return pd.array(
        [np.nan if v is None else str(v) for v in values], dtype=object
    )


def _decode_table(obj: dict, base_dir: Path) -> pd.DataFrame:
    if not isinstance(obj, dict) or "columns" not in obj or "types" not in obj:
        raise ParseError("table entries need 'columns' and 'types'")
    columns = obj["columns"]
    types = obj["types"]
    if len(columns) != len(types):
        raise ParseError("table 'columns' and 'types' differ in length")
    if "ref" in obj:
        path = base_dir / obj["ref"]
        if not path.is_file():
            raise ParseError(f"side-car table {obj['ref']!r} is missing")
        dtypes = {
            c: {"integer": "Int64", "real": float, "text": str}[t]
            for c, t in zip(columns, types)
        }
        frame = pd.read_csv(path, dtype=dtypes)
        for c in columns:
            if str(frame[c].dtype) == "Int64" and not frame[c].isna().any():
                frame[c] = frame[c].astype(np.int64)
        return frame
    rows = obj.get("data", [])
    if not columns:
        return pd.DataFrame()
    series = {}
    for j, (name, kind) in enumerate(zip(columns, types)):
        series[name] = _decode_column([row[j] for row in rows], kind)
    return pd.DataFrame(series, columns=columns)


def save_workflow(doc: WorkflowDoc, path) -> None:
    """Write ``doc`` to ``path`` as JSON, atomically and under a lock."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(path) + ".lock")
    with lock:
        payload = {
            "version": _FORMAT_VERSION,
            "metadata": doc.metadata,
            "phases": [
                {
                    "metadata": phase.metadata,
                    "waves": [
                        {
                            "metadata": wave.metadata,
                            "design": _encode_table(
                                wave.design,
                                path.parent / f"{path.stem}__p{p}w{w}_design.csv",
                            ),
                            "samples": wave.samples,
                            "sampled_data": _encode_table(
                                wave.sampled_data,
                                path.parent / f"{path.stem}__p{p}w{w}_sampled_data.csv",
                            ),
                            "data": _encode_table(
                                wave.data,
                                path.parent / f"{path.stem}__p{p}w{w}_data.csv",
                            ),
                        }
                        for w, wave in enumerate(phase.waves, start=1)
                    ],
                }
                for p, phase in enumerate(doc.phases, start=1)
            ],
        }
        text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
        fd, tmp_name = tempfile.mkstemp(
            dir=path.parent, prefix=path.name, suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(text)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise


def load_workflow(path) -> WorkflowDoc:
    """Read a workflow document written by save_workflow."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no workflow file at {path}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"{path.name} is not a workflow file: {err}") from None
    if not isinstance(payload, dict) or payload.get("version") != _FORMAT_VERSION:
        raise ParseError(
            f"{path.name} has version {payload.get('version')!r}; "
            f"this build reads version {_FORMAT_VERSION}"
        )
    try:
        phases = tuple(
            Phase(
                metadata=dict(phase["metadata"]),
                waves=tuple(
                    Wave(
                        metadata=dict(wave["metadata"]),
                        design=_decode_table(wave["design"], path.parent),
                        samples=list(wave["samples"]),
                        sampled_data=_decode_table(wave["sampled_data"], path.parent),
                        data=_decode_table(wave["data"], path.parent),
                    )
                    for wave in phase["waves"]
                ),
            )
            for phase in payload["phases"]
        )
        return WorkflowDoc(metadata=dict(payload["metadata"]), phases=phases)
    except (KeyError, TypeError) as err:
        raise ParseError(f"{path.name} is missing workflow fields: {err}") from None
