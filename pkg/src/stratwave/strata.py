"""Splitting and merging strata.

Splitting partitions chosen strata on a numeric or categorical variable
and writes the result to a ``new_strata`` column; the original strata
column is untouched and non-target strata pass through unchanged. Numeric
pieces are right-closed: with cut points c1 < ... < ck inside a stratum
whose observed values span [lo, hi], the pieces are [lo, c1], (c1, c2],
..., (ck, hi], and a row with value exactly c_k goes to the lower piece.

New labels have the form ``<old>.<var>_<interval>``, for example
``setosa.Sepal.Width_[2.3,3.4]``. Interval bounds are the observed
per-stratum extremes rendered at up to two decimals (shortest form, so 3.0
prints as ``3``). ``trunc`` shortens the variable part of the label:
a string replaces it outright, an integer keeps that many leading
characters.

Quantile cut points use the linear interpolation convention: the p-th
quantile of n ordered values sits at position (n - 1) * p + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    ColumnNotFound,
    DataError,
    EmptyInput,
    EmptyStratumPiece,
    LabelCollision,
    MissingValues,
    UnknownStratum,
)

__all__ = ["SplitSpec", "quantile", "split_strata", "merge_strata"]

_SPLIT_TYPES = ("global_quantile", "local_quantile", "value", "categorical")


@dataclass(frozen=True)
class SplitSpec:
    """How to split strata.

    ``targets`` limits the split to the named strata (None means all).
    ``split_at`` holds quantiles strictly between 0 and 1, raw cut values,
    or category sets, depending on ``split_type``.
    """

    strata_col: str
    split_var: str
    split_type: str
    split_at: Sequence
    targets: Sequence[str] | None = None
    trunc: str | int | None = None

    def __post_init__(self) -> None:
        if self.split_type not in _SPLIT_TYPES:
            raise DataError(
                f"split_type must be one of {', '.join(_SPLIT_TYPES)}; got {self.split_type!r}"
            )


def quantile(values: Sequence[float] | np.ndarray, p: float) -> float:
    """Linearly interpolated quantile of ``values`` at probability ``p``."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput("cannot take a quantile of no values")
    if not np.all(np.isfinite(arr)):
        raise DataError("quantile input must be finite")
    if not 0.0 <= p <= 1.0:
        raise DataError(f"quantile probability must be in [0, 1], got {p!r}")
    return float(np.quantile(arr, p, method="linear"))


def _format_bound(value: float) -> str:
    """Shortest decimal rendering of ``value`` at up to two decimals."""
    d = Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    if d == 0:
        return "0"
    return format(d.normalize(), "f")


def _interval_label(lo: float, hi: float, lowest: bool) -> str:
    left = "[" if lowest else "("
    return f"{left}{_format_bound(lo)},{_format_bound(hi)}]"


def _row_ids(units: pd.DataFrame, mask: pd.Series) -> list:
    if "id" in units.columns:
        return units.loc[mask, "id"].tolist()
    return units.index[mask].tolist()


def _resolve_targets(labels: pd.Series, targets: Sequence[str] | None) -> list[str]:
    present = set(labels)
    if targets is None:
        return sorted(present)
    wanted = [str(t) for t in ([targets] if isinstance(targets, str) else targets)]
    unknown = [t for t in wanted if t not in present]
    if unknown:
        raise UnknownStratum(f"strata not present in the table: {', '.join(unknown)}")
    return wanted


def split_strata(units: pd.DataFrame, spec: SplitSpec) -> pd.DataFrame:
    """Partition target strata on ``spec.split_var``.

    Returns a copy of ``units`` with a ``new_strata`` column. Rows of a
    target stratum with a missing split variable are rejected (the error
    names their ids, or index positions when there is no ``id`` column).
    """
    for col in (spec.strata_col, spec.split_var):
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
    strata = units[spec.strata_col]
    if strata.isna().any():
        raise MissingValues(f"strata column {spec.strata_col!r} has missing values")
    labels = strata.astype(str)
    targets = _resolve_targets(labels, spec.targets)
    target_mask = labels.isin(targets)
    missing = target_mask & units[spec.split_var].isna()
    if missing.any():
        ids = _row_ids(units, missing)
        raise MissingValues(
            f"{spec.split_var!r} is missing for {len(ids)} row(s) in target strata; ids: "
            + ", ".join(str(i) for i in ids)
        )
    if spec.split_type == "categorical":
        new_labels = _split_categorical(units, labels, targets, spec)
    else:
        new_labels = _split_numeric(units, labels, targets, spec)
    out = units.copy()
    out["new_strata"] = new_labels
    _check_label_uniqueness(labels, new_labels, target_mask)
    return out


def _var_display(spec: SplitSpec) -> str:
    if spec.trunc is None:
        return spec.split_var
    if isinstance(spec.trunc, str):
        return spec.trunc
    if isinstance(spec.trunc, int) and not isinstance(spec.trunc, bool) and spec.trunc > 0:
        return spec.split_var[: spec.trunc]
    raise DataError(f"trunc must be a replacement string or a positive character count, got {spec.trunc!r}")


def _split_numeric(
    units: pd.DataFrame,
    labels: pd.Series,
    targets: list[str],
    spec: SplitSpec,
) -> pd.Series:
    split_values = pd.to_numeric(units[spec.split_var], errors="coerce")
    if (split_values.isna() & units[spec.split_var].notna()).any():
        raise DataError(f"column {spec.split_var!r} must be numeric for a {spec.split_type} split")
    var_disp = _var_display(spec)
    target_mask = labels.isin(targets)
    union = split_values[target_mask].to_numpy(dtype=float)
    union_lo, union_hi = float(union.min()), float(union.max())

    if spec.split_type == "value":
        cuts = sorted({float(c) for c in spec.split_at})
        if not cuts:
            raise DataError("value split needs at least one cut point")
        _check_cuts_in_range(cuts, union_lo, union_hi, "the target strata")
        shared_cuts: list[float] | None = cuts
    elif spec.split_type == "global_quantile":
        ps = _quantile_probs(spec.split_at)
        cuts = sorted({quantile(union, p) for p in ps})
        _check_cuts_in_range(cuts, union_lo, union_hi, "the target strata")
        shared_cuts = cuts
    elif spec.split_type == "local_quantile":
        shared_cuts = None  # computed per stratum below
    else:  # pragma: no cover - guarded by SplitSpec
        raise DataError(f"unsupported split_type {spec.split_type!r}")

    new_labels = labels.copy()
    for stratum in targets:
        mask = labels == stratum
        values = split_values[mask].to_numpy(dtype=float)
        lo, hi = float(values.min()), float(values.max())
        if shared_cuts is None:
            ps = _quantile_probs(spec.split_at)
            stratum_cuts = sorted({quantile(values, p) for p in ps})
            _check_cuts_in_range(stratum_cuts, lo, hi, f"stratum {stratum!r}")
            effective = stratum_cuts
        else:
            effective = [c for c in shared_cuts if lo <= c < hi]
        piece_idx = np.searchsorted(np.asarray(effective), values, side="left")
        occupied = set(piece_idx.tolist())
        for i in range(len(effective) + 1):
            if i not in occupied:
                piece_lo = lo if i == 0 else effective[i - 1]
                piece_hi = hi if i == len(effective) else effective[i]
                raise EmptyStratumPiece(
                    f"stratum {stratum!r}: no rows fall in the piece "
                    f"{_interval_label(piece_lo, piece_hi, i == 0)}"
                )
        bounds = [lo] + list(effective) + [hi]
        piece_labels = [
            f"{stratum}.{var_disp}_{_interval_label(bounds[i], bounds[i + 1], i == 0)}"
            for i in range(len(effective) + 1)
        ]
        if len(set(piece_labels)) != len(piece_labels):
            raise LabelCollision(
                f"stratum {stratum!r}: cut points closer than 0.01 produce identical "
                "labels at two decimals"
            )
        new_labels.loc[mask] = [piece_labels[i] for i in piece_idx]
    return new_labels


def _quantile_probs(split_at: Sequence) -> list[float]:
    ps = [float(p) for p in split_at]
    if not ps:
        raise DataError("quantile split needs at least one probability")
    bad = [p for p in ps if not 0.0 < p < 1.0]
    if bad:
        raise DataError(
            "quantile cut points must lie strictly between 0 and 1; got "
            + ", ".join(repr(p) for p in bad)
        )
    return ps


def _check_cuts_in_range(cuts: Sequence[float], lo: float, hi: float, where: str) -> None:
    for c in cuts:
        if not lo <= c < hi:
            raise EmptyStratumPiece(
                f"cut point {c!r} lies outside the observed values of {where} "
                f"(range {lo!r} to {hi!r}); it would leave an empty piece"
            )


def _split_categorical(
    units: pd.DataFrame,
    labels: pd.Series,
    targets: list[str],
    spec: SplitSpec,
) -> pd.Series:
    groups: list[list[str]] = []
    for entry in spec.split_at:
        if isinstance(entry, (list, tuple, set, frozenset)):
            group = [str(v) for v in entry]
        else:
            group = [str(entry)]
        if not group:
            raise DataError("categorical split groups cannot be empty")
        groups.append(group)
    if not groups:
        raise DataError("categorical split needs at least one category set")
    seen: dict[str, int] = {}
    for i, group in enumerate(groups):
        for cat in group:
            if cat in seen:
                raise DataError(f"category {cat!r} appears in more than one set")
            seen[cat] = i
    var_disp = _var_display(spec)
    target_mask = labels.isin(targets)
    values = units[spec.split_var].astype(str)
    uncovered = sorted(set(values[target_mask]) - set(seen))
    if uncovered:
        raise DataError(
            "categorical split does not cover values: " + ", ".join(repr(v) for v in uncovered)
        )
    union_present = {seen[v] for v in values[target_mask]}
    for i, group in enumerate(groups):
        if i not in union_present:
            raise EmptyStratumPiece(
                f"no rows in the target strata take a value from the set {{{','.join(group)}}}"
            )
    new_labels = labels.copy()
    for stratum in targets:
        mask = labels == stratum
        group_idx = values[mask].map(seen)
        piece_labels = {
            i: f"{stratum}.{var_disp}_{{{','.join(groups[i])}}}" for i in set(group_idx)
        }
        new_labels.loc[mask] = group_idx.map(piece_labels)
    return new_labels


def _check_label_uniqueness(
    old_labels: pd.Series, new_labels: pd.Series, target_mask: pd.Series
) -> None:
    touched = set(new_labels[target_mask])
    untouched = set(old_labels[~target_mask])
    clash = touched & untouched
    if clash:
        raise LabelCollision(
            "new labels collide with existing strata: " + ", ".join(sorted(clash))
        )


def merge_strata(
    units: pd.DataFrame,
    strata_col: str,
    merge: Sequence[str],
    name: str,
) -> pd.DataFrame:
    """Collapse the strata in ``merge`` into a single stratum ``name``.

    ``name`` may repeat one of the merged labels; it must not collide with
    a stratum that survives outside the merge.
    """
    if strata_col not in units.columns:
        raise ColumnNotFound(f"column {strata_col!r} not found in unit table")
    strata = units[strata_col]
    if strata.isna().any():
        raise MissingValues(f"strata column {strata_col!r} has missing values")
    labels = strata.astype(str)
    merged = [str(m) for m in ([merge] if isinstance(merge, str) else merge)]
    if not merged:
        raise DataError("merge needs at least one stratum label")
    present = set(labels)
    unknown = [m for m in merged if m not in present]
    if unknown:
        raise UnknownStratum(f"strata not present in the table: {', '.join(unknown)}")
    surviving = present - set(merged)
    if str(name) in surviving:
        raise LabelCollision(
            f"merged name {name!r} collides with a stratum outside the merge"
        )
    out = units.copy()
    new_labels = labels.copy()
    new_labels[labels.isin(merged)] = str(name)
    out["new_strata"] = new_labels
    return out
