"""Multi-phase, multi-wave survey workflow documents.

A workflow document is a value: every operation returns a new document
and never mutates the one passed in. The document tree is

    WorkflowDoc
      metadata                 overall key/value map
      phases[k]
        metadata               phase-level map
        waves[j]
          metadata             wave-level map
          design               allocation table for the wave
          samples              ids selected in the wave
          sampled_data         data collected for those ids
          data                 accumulated data after merging

Arguments for the wrapped operations resolve through the metadata
cascade: an explicit value wins, then the wave map, the phase map, and
finally the overall map. Put ``strata``, ``y``, ``id``, ``seed`` and
``sampled_ind`` where they naturally live (usually the phase map) and
the per-wave calls stay short.

Phase 1 always has exactly one wave; it holds the data everyone starts
from, so there is nothing to iterate over.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .allocation import allocate_wave, optimum_allocation, wave_history
from .errors import (
    DataError,
    DuplicateId,
    EmptyInput,
    MissingArgument,
    ShapeMismatch,
    SlotTypeMismatch,
    StratwaveError,
    UnknownId,
    UnknownLocation,
    WaveRequired,
)
from .sampling import extract_sampled_ids, sample_strata

__all__ = [
    "UNSET",
    "Wave",
    "Phase",
    "WorkflowDoc",
    "new_multiwave",
    "get_slot",
    "set_slot",
    "resolve_arg",
    "apply_multiwave",
    "merge_samples",
    "workflow_summary",
]

_SLOTS = ("metadata", "design", "samples", "sampled_data", "data")
_TABLE_SLOTS = ("design", "sampled_data", "data")


class _Unset:
    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "UNSET"


UNSET = _Unset()


@dataclass(frozen=True)
class Wave:
    metadata: dict
    design: pd.DataFrame
    samples: list
    sampled_data: pd.DataFrame
    data: pd.DataFrame


@dataclass(frozen=True)
class Phase:
    metadata: dict
    waves: tuple[Wave, ...]


@dataclass(frozen=True)
class WorkflowDoc:
    metadata: dict
    phases: tuple[Phase, ...]


def _empty_wave() -> Wave:
    return Wave(
        metadata={},
        design=pd.DataFrame(),
        samples=[],
        sampled_data=pd.DataFrame(),
        data=pd.DataFrame(),
    )


def new_multiwave(phases: int, waves: Sequence[int]) -> WorkflowDoc:
    """Create an empty document with the given phase and wave counts.

    ``waves`` gives the wave count per phase; phase 1 must have exactly
    one wave.
    """
    if not isinstance(phases, int) or isinstance(phases, bool) or phases < 1:
        raise DataError(f"phases must be a positive integer, got {phases!r}")
    counts = list(waves)
    if len(counts) != phases:
        raise ShapeMismatch("length of the `waves` argument must match the number of phases")
    for c in counts:
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            raise DataError(f"every phase needs at least one wave, got {c!r}")
    if counts[0] != 1:
        raise DataError(
            f"phase 1 holds the starting data and always has exactly one wave, got {counts[0]}"
        )
    return WorkflowDoc(
        metadata={},
        phases=tuple(Phase(metadata={}, waves=tuple(_empty_wave() for _ in range(c))) for c in counts),
    )


def _locate(
    doc: WorkflowDoc, slot: str, phase: int | None, wave: int | None
) -> tuple[int | None, int | None]:
    """Validate and normalize (phase, wave) indices for a slot access."""
    if slot not in _SLOTS:
        raise DataError(f"unknown slot {slot!r}; slots are " + ", ".join(_SLOTS))
    if phase is None:
        if wave is not None:
            raise UnknownLocation("a wave index needs a phase index")
        if slot != "metadata":
            raise DataError(f"only metadata exists at the overall level, not {slot!r}")
        return None, None
    if not isinstance(phase, int) or isinstance(phase, bool) or not 1 <= phase <= len(doc.phases):
        raise UnknownLocation(
            f"phase {phase!r} does not exist; the document has {len(doc.phases)} phase(s)"
        )
    ph = doc.phases[phase - 1]
    if wave is None:
        if slot == "metadata":
            return phase, None
        if len(ph.waves) == 1:
            return phase, 1
        raise WaveRequired(
            f"phase {phase} has {len(ph.waves)} waves; say which one you mean"
        )
    if not isinstance(wave, int) or isinstance(wave, bool) or not 1 <= wave <= len(ph.waves):
        raise UnknownLocation(
            f"wave {wave!r} does not exist; phase {phase} has {len(ph.waves)} wave(s)"
        )
    return phase, wave


def get_slot(doc: WorkflowDoc, slot: str, *, phase: int | None = None, wave: int | None = None):
    """Read a slot. Without a phase, only the overall metadata is addressable;
    without a wave, single-wave phases resolve to their one wave."""
    phase, wave = _locate(doc, slot, phase, wave)
    if phase is None:
        return doc.metadata
    ph = doc.phases[phase - 1]
    if wave is None:
        return ph.metadata
    return getattr(ph.waves[wave - 1], slot)


def _check_metadata(value) -> dict:
    if not isinstance(value, Mapping):
        raise SlotTypeMismatch(f"metadata must be a mapping, got {type(value).__name__}")
    for key in value:
        if not isinstance(key, str):
            raise SlotTypeMismatch(f"metadata keys must be strings, got {key!r}")
    try:
        json.dumps(dict(value), allow_nan=False)
    except (TypeError, ValueError):
        raise SlotTypeMismatch("metadata values must be representable as plain text") from None
    return dict(value)


def _check_samples(value) -> list:
    if isinstance(value, (str, bytes, Mapping, pd.DataFrame)):
        raise SlotTypeMismatch("samples must be a list of ids")
    try:
        items = list(value)
    except TypeError:
        raise SlotTypeMismatch("samples must be a list of ids") from None
    out = []
    for item in items:
        if isinstance(item, np.generic):
            item = item.item()
        if not isinstance(item, (str, int, float)):
            raise SlotTypeMismatch(f"sample ids must be scalars, got {type(item).__name__}")
        out.append(item)
    return out


def set_slot(
    doc: WorkflowDoc, slot: str, value, *, phase: int | None = None, wave: int | None = None
) -> WorkflowDoc:
    """Write a slot and return the updated document."""
    phase, wave = _locate(doc, slot, phase, wave)
    if slot == "metadata":
        value = _check_metadata(value)
    elif slot == "samples":
        value = _check_samples(value)
    else:
        if not isinstance(value, pd.DataFrame):
            raise SlotTypeMismatch(f"{slot} must be a table, got {type(value).__name__}")
        # slots hold tables by position, so persistence round-trips exactly
        value = value.reset_index(drop=True)
    if phase is None:
        return replace(doc, metadata=value)
    ph = doc.phases[phase - 1]
    if wave is None:
        new_phase = replace(ph, metadata=value)
    else:
        new_wave = replace(ph.waves[wave - 1], **{slot: value})
        new_phase = replace(
            ph, waves=ph.waves[: wave - 1] + (new_wave,) + ph.waves[wave:]
        )
    return replace(
        doc, phases=doc.phases[: phase - 1] + (new_phase,) + doc.phases[phase:]
    )


def resolve_arg(
    doc: WorkflowDoc,
    name: str,
    *,
    phase: int | None = None,
    wave: int | None = None,
    explicit=UNSET,
):
    """Resolve an argument: explicit value, then wave, phase, and overall
    metadata, in that order."""
    if explicit is not UNSET:
        return explicit
    if phase is not None and wave is not None:
        _locate(doc, "data", phase, wave)
        wave_meta = doc.phases[phase - 1].waves[wave - 1].metadata
        if name in wave_meta:
            return wave_meta[name]
    if phase is not None:
        _locate(doc, "metadata", phase, None)
        phase_meta = doc.phases[phase - 1].metadata
        if name in phase_meta:
            return phase_meta[name]
    if name in doc.metadata:
        return doc.metadata[name]
    raise MissingArgument(
        f"no value for {name!r}: not passed explicitly and not in the wave, "
        "phase, or overall metadata"
    )


def _resolve_optional(doc, name, phase, wave, args, default):
    try:
        return resolve_arg(
            doc, name, phase=phase, wave=wave, explicit=args.get(name, UNSET)
        )
    except MissingArgument:
        return default


def _latest_data(doc: WorkflowDoc, phase: int, wave: int) -> pd.DataFrame:
    """Most recent populated data slot strictly before (phase, wave)."""
    for w in range(wave - 1, 0, -1):
        candidate = doc.phases[phase - 1].waves[w - 1].data
        if not candidate.empty:
            return candidate
    for p in range(phase - 1, 0, -1):
        for w in range(len(doc.phases[p - 1].waves), 0, -1):
            candidate = doc.phases[p - 1].waves[w - 1].data
            if not candidate.empty:
                return candidate
    raise EmptyInput(
        f"no populated data slot precedes phase {phase} wave {wave}; "
        "place the starting data in phase 1 first"
    )


def _indicator_column(doc, phase, wave, args, data: pd.DataFrame) -> str | None:
    """The cumulative sampling indicator named by the metadata, if the
    input data carries it yet (it appears after the phase's first merge)."""
    explicit = args.get("already_sampled", UNSET)
    if explicit is not UNSET:
        return explicit
    name = _resolve_optional(doc, "sampled_ind", phase, wave, args, None)
    if name is not None and name in data.columns:
        return name
    return None


def apply_multiwave(
    doc: WorkflowDoc, phase: int, wave: int, fun: str, args: Mapping | None = None
) -> WorkflowDoc:
    """Run an allocation or sampling step against the wave's input data.

    ``fun`` is one of ``optimum_allocation``, ``allocate_wave``, or
    ``sample_strata``. Input rows come from the most recent populated
    data slot before (phase, wave). Allocation results land in the design
    slot; sampling records the selected ids in the samples slot.
    """
    args = dict(args or {})
    if fun not in ("optimum_allocation", "allocate_wave", "sample_strata"):
        raise DataError(
            f"unknown function {fun!r}; choose optimum_allocation, allocate_wave, "
            "or sample_strata"
        )
    _locate(doc, "data", phase, wave)
    data = _latest_data(doc, phase, wave)
    try:
        if fun == "optimum_allocation":
            design = optimum_allocation(
                data,
                strata_col=resolve_arg(doc, "strata", phase=phase, wave=wave, explicit=args.get("strata", UNSET)),
                y_col=resolve_arg(doc, "y", phase=phase, wave=wave, explicit=args.get("y", UNSET)),
                nsample=_resolve_optional(doc, "nsample", phase, wave, args, None),
                method=_resolve_optional(doc, "method", phase, wave, args, "WrightII"),
                allow_small=bool(_resolve_optional(doc, "allow_small", phase, wave, args, False)),
            )
            return set_slot(doc, "design", design, phase=phase, wave=wave)
        if fun == "allocate_wave":
            indicator = _indicator_column(doc, phase, wave, args, data)
            if indicator is None:
                raise MissingArgument(
                    "allocate_wave needs the name of the already-sampled indicator "
                    "column (`already_sampled` argument or `sampled_ind` metadata)"
                )
            summaries, prior = wave_history(
                data,
                strata_col=resolve_arg(doc, "strata", phase=phase, wave=wave, explicit=args.get("strata", UNSET)),
                y_col=resolve_arg(doc, "y", phase=phase, wave=wave, explicit=args.get("y", UNSET)),
                already_sampled=indicator,
            )
            design = allocate_wave(
                summaries,
                prior,
                nsample=resolve_arg(doc, "nsample", phase=phase, wave=wave, explicit=args.get("nsample", UNSET)),
                detailed=bool(_resolve_optional(doc, "detailed", phase, wave, args, False)),
            )
            return set_slot(doc, "design", design, phase=phase, wave=wave)
        if fun == "sample_strata":
            design = doc.phases[phase - 1].waves[wave - 1].design
            if design.empty:
                raise EmptyInput(
                    f"phase {phase} wave {wave} has no design to sample from; "
                    "run an allocation first"
                )
            sampled = sample_strata(
                data,
                strata_col=resolve_arg(doc, "strata", phase=phase, wave=wave, explicit=args.get("strata", UNSET)),
                id_col=resolve_arg(doc, "id", phase=phase, wave=wave, explicit=args.get("id", UNSET)),
                design=design,
                seed=resolve_arg(doc, "seed", phase=phase, wave=wave, explicit=args.get("seed", UNSET)),
                n_col=_resolve_optional(doc, "n_col", phase, wave, args, None),
                already_sampled=_indicator_column(doc, phase, wave, args, data),
            )
            ids = extract_sampled_ids(
                sampled, resolve_arg(doc, "id", phase=phase, wave=wave, explicit=args.get("id", UNSET))
            )
            return set_slot(doc, "samples", ids, phase=phase, wave=wave)
    except StratwaveError as err:
        raise type(err)(f"phase {phase} wave {wave}: {err}") from err
    raise AssertionError("unreachable")  # the fun check above is exhaustive


def merge_samples(
    doc: WorkflowDoc,
    phase: int,
    wave: int,
    *,
    id_col: str | None = None,
    sampled_ind: str | None = None,
) -> WorkflowDoc:
    """Fold the wave's collected data into the accumulated data.

    Left-joins the wave's sampled_data onto the previous data by id: new
    columns appear with missing values for unsampled rows; columns present
    in both keep the prior value except for the sampled rows, which take
    the newly collected one (a disagreement is recorded in the wave
    metadata). The ``sampled_ind`` column is rewritten to flag every id
    sampled in any wave of this phase so far.
    """
    _locate(doc, "data", phase, wave)
    id_name = resolve_arg(
        doc, "id", phase=phase, wave=wave, explicit=UNSET if id_col is None else id_col
    )
    ind_name = resolve_arg(
        doc,
        "sampled_ind",
        phase=phase,
        wave=wave,
        explicit=UNSET if sampled_ind is None else sampled_ind,
    )
    current = doc.phases[phase - 1].waves[wave - 1]
    if not current.samples:
        raise EmptyInput(f"phase {phase} wave {wave} has no samples to merge")
    if current.sampled_data.empty:
        raise EmptyInput(f"phase {phase} wave {wave} has no sampled_data to merge")
    previous = _latest_data(doc, phase, wave)
    for frame, where in ((previous, "previous data"), (current.sampled_data, "sampled_data")):
        if id_name not in frame.columns:
            raise DataError(f"{where} has no {id_name!r} column")
    if current.sampled_data[id_name].duplicated().any():
        raise DuplicateId(f"sampled_data ids must be unique in phase {phase} wave {wave}")
    prev_ids = set(previous[id_name])
    stray = [i for i in current.sampled_data[id_name] if i not in prev_ids]
    if stray:
        raise UnknownId(
            "sampled_data contains ids missing from the accumulated data: "
            + ", ".join(str(s) for s in stray[:5])
        )

    merged = previous.copy()
    incoming = current.sampled_data.set_index(id_name)
    row_pos = merged[id_name].map({v: i for i, v in enumerate(incoming.index)})
    conflicts: list[str] = []
    for col in incoming.columns:
        new_values = merged[id_name].map(incoming[col])
        if col in merged.columns:
            sampled_rows = row_pos.notna()
            old = merged[col]
            both = sampled_rows & old.notna() & new_values.notna() & (old != new_values)
            for idx in merged.index[both]:
                conflicts.append(
                    f"id {merged.at[idx, id_name]!r} column {col!r}: "
                    f"{old.at[idx]!r} replaced by {new_values.at[idx]!r}"
                )
            merged[col] = new_values.where(sampled_rows, old)
        else:
            merged[col] = new_values

    sampled_so_far: set = set()
    for w in range(1, wave + 1):
        sampled_so_far.update(doc.phases[phase - 1].waves[w - 1].samples)
    merged[ind_name] = merged[id_name].isin(sampled_so_far).astype(int)

    out = set_slot(doc, "data", merged, phase=phase, wave=wave)
    if conflicts:
        meta = dict(get_slot(out, "metadata", phase=phase, wave=wave))
        meta["merge_conflicts"] = conflicts
        out = set_slot(out, "metadata", meta, phase=phase, wave=wave)
    return out


def _describe(slot: str, value) -> tuple[bool, str]:
    if slot == "metadata":
        if not value:
            return False, "empty"
        return True, f"{len(value)} key(s): " + ", ".join(sorted(value))
    if slot == "samples":
        if not value:
            return False, "empty"
        return True, f"{len(value)} id(s)"
    if value.empty:
        return False, "empty"
    return True, f"{len(value)} row(s), {value.shape[1]} column(s)"


def workflow_summary(doc: WorkflowDoc, format: str = "text") -> str:
    """Render the fill state of every slot, as text or as a dot graph."""
    if format == "text":
        return _summary_text(doc)
    if format == "dot":
        return _summary_dot(doc)
    raise DataError(f"format must be 'text' or 'dot', got {format!r}")


def _summary_text(doc: WorkflowDoc) -> str:
    lines = []
    title = doc.metadata.get("title")
    if title is not None:
        lines.append(f"title: {title}")
    _, desc = _describe("metadata", doc.metadata)
    lines.append(f"overall metadata: {desc}")
    for p, ph in enumerate(doc.phases, start=1):
        _, desc = _describe("metadata", ph.metadata)
        lines.append(f"phase {p}:")
        lines.append(f"  metadata: {desc}")
        for w, wv in enumerate(ph.waves, start=1):
            lines.append(f"  wave {w}:")
            for slot in _SLOTS:
                _, desc = _describe(slot, getattr(wv, slot))
                lines.append(f"    {slot}: {desc}")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _summary_dot(doc: WorkflowDoc) -> str:
    lines = [
        "digraph workflow {",
        "  rankdir=LR;",
        "  node [shape=box];",
    ]
    title = doc.metadata.get("title", "workflow")
    filled, desc = _describe("metadata", doc.metadata)
    style = ', style=filled, fillcolor="lightblue"' if filled else ""
    lines.append(f'  root [label="{_dot_escape(str(title))}"{style}];')
    for p, ph in enumerate(doc.phases, start=1):
        pnode = f"p{p}"
        filled, desc = _describe("metadata", ph.metadata)
        style = ', style=filled, fillcolor="lightblue"' if filled else ""
        lines.append(f'  {pnode} [label="phase {p}\\n{_dot_escape(desc)}"{style}];')
        lines.append(f"  root -> {pnode};")
        for w, wv in enumerate(ph.waves, start=1):
            wnode = f"p{p}w{w}"
            lines.append(f'  {wnode} [label="wave {w}"];')
            lines.append(f"  {pnode} -> {wnode};")
            for slot in _SLOTS:
                filled, desc = _describe(slot, getattr(wv, slot))
                snode = f"{wnode}_{slot}"
                style = ', style=filled, fillcolor="lightblue"' if filled else ""
                lines.append(
                    f'  {snode} [label="{slot}\\n{_dot_escape(desc)}"{style}];'
                )
                lines.append(f"  {wnode} -> {snode};")
    lines.append("}")
    return "\n".join(lines) + "\n"
