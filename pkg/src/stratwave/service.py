"""HTTP design service.

A session holds one uploaded dataset. ``preview`` computes a design for
a candidate split without touching the session; ``confirm`` applies a
split and appends the equivalent ``split`` command line to the session's
script, so the interactive run can be replayed later with the CLI
against the originally uploaded file.

All core errors come back as ``{"error": <class name>, "message": ...}``
with status 422 (400 for an unparseable upload, 404 for an unknown
session, 413 for an oversized body).
"""

from __future__ import annotations

import shlex
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .allocation import allocate_wave, optimum_allocation, wave_history
from .errors import ColumnNotFound, MissingArgument, ParseError, StratwaveError
from .io import parse_units_text
from .persistence import _column_type, _encode_table
from .strata import SplitSpec, split_strata

__all__ = ["create_app"]


class UnknownSession(Exception):
    pass


class BodyTooLarge(Exception):
    pass


@dataclass
class _Session:
    dataset: pd.DataFrame
    strata_col: str | None = None
    log: list[str] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _columns_payload(frame: pd.DataFrame) -> list[dict[str, str]]:
    return [
        {"name": str(c), "type": _column_type(frame[c].dtype)} for c in frame.columns
    ]


def _counts(frame: pd.DataFrame, col: str) -> dict[str, int]:
    return {str(k): int(v) for k, v in frame[col].value_counts().sort_index().items()}


def _split_spec(payload: dict) -> SplitSpec:
    if not isinstance(payload, dict):
        raise MissingArgument("split must be an object")
    for key in ("strata", "split_var", "type", "split_at"):
        if key not in payload:
            raise MissingArgument(f"split needs a {key!r} field")
    split_at = payload["split_at"]
    if not isinstance(split_at, list):
        split_at = [split_at]
    split_at = [tuple(v) if isinstance(v, list) else v for v in split_at]
    return SplitSpec(
        strata_col=payload["strata"],
        split_var=payload["split_var"],
        split_type=payload["type"],
        split_at=split_at,
        targets=payload.get("targets"),
        trunc=payload.get("trunc"),
    )


def _split_at_token(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _script_line(spec: SplitSpec) -> str:
    parts = [
        "split", "--input", "data.csv",
        "--strata", spec.strata_col,
        "--split-var", spec.split_var,
        "--type", spec.split_type,
        "--split-at", *[_split_at_token(v) for v in spec.split_at],
    ]
    if spec.targets is not None:
        parts += ["--targets", *[str(t) for t in spec.targets]]
    if spec.trunc is not None:
        parts += ["--trunc", str(spec.trunc)]
    parts += ["--out", "data.csv"]
    return shlex.join(parts)


def _allocate(frame: pd.DataFrame, payload: dict, strata_col: str) -> pd.DataFrame:
    if not isinstance(payload, dict):
        raise MissingArgument("allocation must be an object")
    if "y" not in payload:
        raise MissingArgument("allocation needs a 'y' field")
    if "already_sampled" in payload:
        summaries, prior = wave_history(
            frame,
            strata_col=strata_col,
            y_col=payload["y"],
            already_sampled=payload["already_sampled"],
        )
        return allocate_wave(summaries, prior, payload.get("nsample"))
    return optimum_allocation(
        frame,
        method=payload.get("method", "WrightII"),
        strata_col=strata_col,
        y_col=payload["y"],
        nsample=payload.get("nsample"),
    )


def create_app(max_body_bytes: int = 20_000_000, snapshot_dir=None) -> FastAPI:
    """Build the service; sessions live in process memory."""
    app = FastAPI(title="stratwave design service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> _Session:
        with registry_lock:
            try:
                return sessions[session_id]
            except KeyError:
                raise UnknownSession(f"no session {session_id!r}") from None

    @app.exception_handler(StratwaveError)
    def core_error(request: Request, exc: StratwaveError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(UnknownSession)
    def unknown_session(request: Request, exc: UnknownSession) -> JSONResponse:
        return JSONResponse(
            status_code=404,
            content={"error": "UnknownSession", "message": str(exc)},
        )

    @app.exception_handler(BodyTooLarge)
    def body_too_large(request: Request, exc: BodyTooLarge) -> JSONResponse:
        return JSONResponse(
            status_code=413,
            content={"error": "BodyTooLarge", "message": str(exc)},
        )

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.body()
        if len(body) > max_body_bytes:
            raise BodyTooLarge(
                f"upload of {len(body)} bytes exceeds the limit of {max_body_bytes}"
            )
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as err:
            return JSONResponse(
                status_code=400,
                content={"error": "ParseError", "message": f"not UTF-8 text: {err}"},
            )
        try:
            frame = parse_units_text(text, source="upload")
        except ParseError as err:
            return JSONResponse(
                status_code=400,
                content={"error": "ParseError", "message": str(err)},
            )
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = _Session(dataset=frame)
        return {
            "session_id": session_id,
            "columns": _columns_payload(frame),
            "row_count": len(frame),
        }

    @app.post("/sessions/{session_id}/preview")
    def preview(session_id: str, payload: dict):
        session = get_session(session_id)
        with session.lock:
            frame = session.dataset
            allocation = payload.get("allocation")
            if not isinstance(allocation, dict):
                raise MissingArgument("preview needs an 'allocation' object")
            split = payload.get("split")
            if split is not None:
                frame = split_strata(frame, _split_spec(split))
            default_col = "new_strata" if split is not None else session.strata_col
            strata_col = allocation.get("strata") or default_col
            if strata_col is None:
                raise MissingArgument(
                    "no strata column yet: name one in the allocation or preview a split"
                )
            design = _allocate(frame, allocation, strata_col)
            return {
                "design": _encode_table(design, sidecar=None),
                "strata_counts": _counts(frame, strata_col),
            }

    @app.post("/sessions/{session_id}/confirm")
    def confirm(session_id: str, payload: dict):
        session = get_session(session_id)
        with session.lock:
            spec = _split_spec(payload.get("split"))
            session.dataset = split_strata(session.dataset, spec)
            session.strata_col = "new_strata"
            line = _script_line(spec)
            session.log.append(line)
            if snapshot_dir is not None:
                from .io import write_units

                directory = Path(snapshot_dir)
                directory.mkdir(parents=True, exist_ok=True)
                write_units(session.dataset, directory / f"{session_id}.csv")
            return {
                "line": line,
                "strata_counts": _counts(session.dataset, "new_strata"),
            }

    @app.get("/sessions/{session_id}/script")
    def script(session_id: str) -> PlainTextResponse:
        session = get_session(session_id)
        with session.lock:
            body = "".join(f"{line}\n" for line in session.log)
        return PlainTextResponse(body)

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str, strata: str | None = None):
        session = get_session(session_id)
        with session.lock:
            col = strata or session.strata_col
            counts = None
            if col is not None:
                if col not in session.dataset.columns:
                    raise ColumnNotFound(f"column {col!r} not found in the dataset")
                counts = _counts(session.dataset, col)
            return {
                "columns": _columns_payload(session.dataset),
                "row_count": len(session.dataset),
                "strata_col": session.strata_col,
                "strata_counts": counts,
            }

    return app
