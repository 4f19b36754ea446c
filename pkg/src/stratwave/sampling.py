"""Seeded simple random sampling within strata.

Each stratum draws from its own PCG64 stream, keyed by the request seed
plus a hash of the stratum label, so the draw for one stratum never
depends on which other strata are present. Within a stratum the eligible
ids are sorted by their string form and partially shuffled; the first
``n`` become the sample. Input row order therefore has no effect on the
selection, only the seed and the eligible id set do.

Units flagged by an ``already_sampled`` indicator are excluded before
drawing, which is what lets successive waves accumulate samples without
ever picking a unit twice.
"""

from __future__ import annotations

import hashlib
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    AmbiguousInput,
    ColumnNotFound,
    DataError,
    DuplicateId,
    InsufficientUnits,
    MissingValues,
    UnknownStratum,
)

__all__ = ["sample_strata", "extract_sampled_ids"]


def _stratum_rng(seed: int, label: str) -> np.random.Generator:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    child = int.from_bytes(digest[:8], "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, child])))


def _draw(ids: list, n: int, rng: np.random.Generator) -> list:
    """First ``n`` entries of a seeded partial shuffle of ``ids``."""
    pool = sorted(ids, key=str)
    for i in range(n):
        j = i + int(rng.integers(0, len(pool) - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:n]


def _coerce_design(
    design, design_strata_col: str, n_col: str | None
) -> dict[str, int]:
    if isinstance(design, Mapping):
        items = list(design.items())
    elif isinstance(design, pd.DataFrame):
        if design_strata_col not in design.columns:
            raise ColumnNotFound(
                f"design has no {design_strata_col!r} column; columns are "
                + ", ".join(map(str, design.columns))
            )
        if n_col is None:
            candidates = [c for c in ("n_to_sample", "stratum_size") if c in design.columns]
            if not candidates:
                raise ColumnNotFound(
                    "design has neither an n_to_sample nor a stratum_size column; "
                    "pass n_col to name the allocation column"
                )
            if len(candidates) == 2:
                raise AmbiguousInput(
                    "design has both n_to_sample and stratum_size; pass n_col to pick one"
                )
            n_col = candidates[0]
        elif n_col not in design.columns:
            raise ColumnNotFound(f"design has no {n_col!r} column")
        items = list(zip(design[design_strata_col].astype(str), design[n_col]))
    else:
        raise AmbiguousInput(
            f"design must be a table or a label-to-count mapping, got {type(design).__name__}"
        )
    out: dict[str, int] = {}
    for label, count in items:
        label = str(label)
        if label in out:
            raise DataError(f"design lists stratum {label!r} more than once")
        if pd.isna(count) or float(count) != int(count) or int(count) < 0:
            raise DataError(f"allocation for stratum {label!r} must be a count, got {count!r}")
        out[label] = int(count)
    return out


def sample_strata(
    units: pd.DataFrame,
    strata_col: str,
    id_col: str,
    design,
    *,
    seed: int,
    design_strata_col: str = "strata",
    n_col: str | None = None,
    already_sampled: str | None = None,
) -> pd.DataFrame:
    """Draw each stratum's allocated sample and mark it in ``sample_indicator``.

    ``design`` is a design table (the allocation column found automatically
    among ``n_to_sample``/``stratum_size``, or named via ``n_col``) or a
    plain mapping of stratum label to count. Strata missing from the design
    get all-zero indicators. Rows where ``already_sampled`` is 1 are never
    selected.
    """
    for col in (strata_col, id_col):
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise DataError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < 2**64:
        raise DataError(f"seed must fit in 64 bits, got {seed!r}")
    ids = units[id_col]
    if ids.isna().any():
        raise MissingValues(f"id column {id_col!r} has missing values")
    if ids.duplicated().any():
        dupes = ids[ids.duplicated()].unique()
        raise DuplicateId(
            "id column values must be unique; repeated: "
            + ", ".join(str(d) for d in dupes[:5])
        )
    strata = units[strata_col]
    if strata.isna().any():
        raise MissingValues(f"strata column {strata_col!r} has missing values")
    labels = strata.astype(str)

    if already_sampled is not None:
        if already_sampled not in units.columns:
            raise ColumnNotFound(f"column {already_sampled!r} not found in unit table")
        flags = units[already_sampled]
        if flags.isna().any():
            raise MissingValues(f"indicator column {already_sampled!r} has missing values")
        if not flags.isin([0, 1]).all():
            raise DataError(f"indicator column {already_sampled!r} must be 0/1")
        eligible_mask = flags != 1
    else:
        eligible_mask = pd.Series(True, index=units.index)

    allocation = _coerce_design(design, design_strata_col, n_col)
    present = set(labels)
    unknown = sorted(set(allocation) - present)
    if unknown:
        raise UnknownStratum(
            "design names strata not present in the data: " + ", ".join(unknown)
        )

    selected: set = set()
    for label in sorted(allocation):
        n = allocation[label]
        pool = ids[(labels == label) & eligible_mask].tolist()
        if n > len(pool):
            raise InsufficientUnits(
                f"stratum {label!r} has {len(pool)} unit(s) available but the design "
                f"asks for {n}"
            )
        if n:
            selected.update(_draw(pool, n, _stratum_rng(int(seed), label)))

    out = units.copy()
    out["sample_indicator"] = ids.isin(selected).astype(int)
    return out


def extract_sampled_ids(units: pd.DataFrame, id_col: str) -> list:
    """Ids of the rows flagged by ``sample_indicator``, in table order."""
    for col in (id_col, "sample_indicator"):
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
    return units.loc[units["sample_indicator"] == 1, id_col].tolist()
