"""Optimum sample allocation for stratified designs.

Given strata with population counts N_h and standard deviations S_h, the
classical closed-form (Neyman) allocation assigns stratum h the fraction

    f_h = N_h * S_h / sum_i(N_i * S_i)

of the total sample. Multiplying by a budget n and rounding gives integer
sizes, but the rounded solution is not always the best integer solution.
The exact integer optimum is found greedily: start every stratum at a
floor (1 or 2 units), then repeatedly award one more unit to the stratum
with the largest remaining priority value

    p_h(k) = N_h * S_h / sqrt(k * (k + 1))

where k is the stratum's current size. Stratum sizes are capped at N_h.
The greedy solution minimizes the variance of the stratified total

    Var = sum_h(N_h^2 * S_h^2 / n_h) - sum_h(N_h^2 * S_h^2 / N_h)

over all integer allocations that respect the floor and the caps.

:func:`allocate_wave` extends the exact allocation to multi-wave designs
where some strata already hold samples from earlier waves: the optimum is
computed for the cumulative total, strata that are already over their
optimum are frozen at their current counts, and the remainder is re-solved
over the strata that still have room.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    AmbiguousInput,
    BudgetBelowFloor,
    BudgetExceedsPopulation,
    ColumnNotFound,
    DataError,
    DegenerateVariance,
    InsufficientData,
    MissingValues,
    ShapeMismatch,
    StratumTooSmall,
    ZeroAllocation,
)

__all__ = [
    "StratumSummary",
    "VarianceReport",
    "summarize_strata",
    "neyman_allocation",
    "wright_allocation",
    "optimum_allocation",
    "estimator_variance",
    "allocate_wave",
    "wave_history",
]

# Two priority values closer than this (relative to their magnitude) are
# treated as tied and ordered by the deterministic tie-break instead of
# by floating point noise.
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class StratumSummary:
    """Population count and standard deviation for one stratum."""

    label: str
    npop: int
    sd: float


@dataclass(frozen=True)
class VarianceReport:
    """Variance of the stratified total estimator.

    ``variance`` is the full expression including the finite population
    correction; ``finite_population_term`` is the subtracted constant
    sum_h(N_h^2 * S_h^2 / N_h).
    """

    variance: float
    finite_population_term: float


def _validate_summaries(summaries: Iterable[StratumSummary]) -> list[StratumSummary]:
    """Check labels, counts and sds, and return summaries sorted by label."""
    entries = list(summaries)
    if not entries:
        raise DataError("at least one stratum summary is required")
    seen: set[str] = set()
    cleaned = []
    for s in entries:
        label = str(s.label)
        if label in seen:
            raise DataError(f"duplicate stratum label: {label!r}")
        seen.add(label)
        npop = s.npop
        if not isinstance(npop, (int, np.integer)) or isinstance(npop, bool):
            raise DataError(f"stratum {label!r}: npop must be an integer, got {npop!r}")
        if npop < 1:
            raise DataError(f"stratum {label!r}: npop must be at least 1, got {npop}")
        sd = float(s.sd)
        if not math.isfinite(sd) or sd < 0:
            raise DataError(f"stratum {label!r}: sd must be finite and nonnegative, got {s.sd!r}")
        cleaned.append(StratumSummary(label, int(npop), sd))
    cleaned.sort(key=lambda s: s.label)
    return cleaned


def summarize_strata(units: pd.DataFrame, strata_col: str, y_col: str) -> list[StratumSummary]:
    """Compute per-stratum population counts and sample standard deviations.

    ``npop`` counts every row of the stratum, including rows where ``y_col``
    is missing; the standard deviation (n - 1 denominator) uses only the
    observed values. Strata with fewer than two observed values have no
    defined sd and raise :class:`InsufficientData`.
    """
    for col in (strata_col, y_col):
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
    if not pd.api.types.is_numeric_dtype(units[y_col]):
        raise DataError(f"column {y_col!r} must be numeric to compute standard deviations")
    strata = units[strata_col]
    if strata.isna().any():
        n_missing = int(strata.isna().sum())
        raise MissingValues(f"{n_missing} row(s) have a missing value in strata column {strata_col!r}")
    out = []
    for label, grp in units.groupby(strata.astype(str), sort=True):
        observed = grp[y_col].dropna()
        if len(observed) < 2:
            raise InsufficientData(
                f"stratum {label!r} has {len(observed)} observed value(s) of {y_col!r}; "
                "at least 2 are needed to estimate a standard deviation"
            )
        sd = float(np.std(observed.to_numpy(dtype=float), ddof=1))
        out.append(StratumSummary(str(label), int(len(grp)), sd))
    return out


def _design_table(
    entries: Sequence[StratumSummary],
    fractions: Sequence[float],
    sizes: Mapping[str, int] | None,
) -> pd.DataFrame:
    data: dict[str, list] = {
        "strata": [s.label for s in entries],
        "npop": [s.npop for s in entries],
        "sd": [s.sd for s in entries],
        "n_sd": [s.npop * s.sd for s in entries],
        "stratum_fraction": list(fractions),
    }
    if sizes is not None:
        data["stratum_size"] = [int(sizes[s.label]) for s in entries]
    return pd.DataFrame(data)


def _largest_remainder(targets: Sequence[tuple[str, float]], total: int) -> dict[str, int]:
    """Round exact per-stratum targets to integers summing to ``total``.

    Every stratum keeps the floor of its target; leftover units go to the
    largest fractional remainders first. Ties are broken by the larger
    exact target, then by label.
    """
    floors = {label: int(math.floor(t)) for label, t in targets}
    leftover = total - sum(floors.values())
    order = sorted(
        targets,
        key=lambda lt: (-(lt[1] - math.floor(lt[1])), -lt[1], lt[0]),
    )
    for label, _ in order[:leftover]:
        floors[label] += 1
    return floors


def neyman_allocation(
    summaries: Iterable[StratumSummary], nsample: int | None = None
) -> pd.DataFrame:
    """Closed-form allocation proportional to N_h * S_h.

    Fractions are exact reals. When ``nsample`` is given, integer sizes are
    produced by largest-remainder rounding so they sum to ``nsample``
    exactly. A stratum whose rounded size is zero is kept (with a warning)
    rather than silently bumped to one.
    """
    entries = _validate_summaries(summaries)
    weights = [s.npop * s.sd for s in entries]
    total_weight = sum(weights)
    if total_weight == 0:
        raise DegenerateVariance("every stratum has sd 0; allocation fractions are undefined")
    fractions = [w / total_weight for w in weights]
    sizes = None
    if nsample is not None:
        nsample = _validate_budget(nsample, entries)
        sizes = _largest_remainder(
            [(s.label, f * nsample) for s, f in zip(entries, fractions)], nsample
        )
        zero = [label for label, size in sizes.items() if size == 0]
        if zero:
            warnings.warn(
                f"allocation assigns 0 units to strata: {', '.join(sorted(zero))}",
                stacklevel=2,
            )
    return _design_table(entries, fractions, sizes)


def _validate_budget(nsample: int, entries: Sequence[StratumSummary]) -> int:
    if not isinstance(nsample, (int, np.integer)) or isinstance(nsample, bool):
        raise DataError(f"nsample must be an integer, got {nsample!r}")
    total_npop = sum(s.npop for s in entries)
    if nsample > total_npop:
        raise BudgetExceedsPopulation(
            f"requested sample of {nsample} exceeds the population of {total_npop}"
        )
    return int(nsample)


def _tied(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return math.isinf(a) and math.isinf(b)
    return abs(a - b) <= _TIE_EPS * max(abs(a), abs(b))


def _wright_sizes(
    entries: Sequence[StratumSummary],
    nsample: int,
    floors: Mapping[str, int],
) -> dict[str, int]:
    """Greedy exact integer allocation above per-stratum floors.

    Candidate priority values are sorted descending; near-equal values are
    reordered by larger N_h * S_h, then by label, so ties never depend on
    floating point noise. A stratum at its population cap contributes no
    further candidates. Zero-sd strata have priority 0 everywhere, so they
    stay at their floor unless every positive-sd stratum is capped.
    """
    sizes = {s.label: int(floors[s.label]) for s in entries}
    remaining = nsample - sum(sizes.values())
    if remaining == 0:
        return sizes
    candidates: list[tuple[float, float, str, int]] = []
    for s in entries:
        weight = s.npop * s.sd
        lo = sizes[s.label]
        hi = min(s.npop, lo + remaining)
        for k in range(lo, hi):
            if weight == 0.0:
                priority = 0.0
            elif k == 0:
                priority = math.inf
            else:
                priority = weight / math.sqrt(k * (k + 1))
            candidates.append((priority, weight, s.label, k))
    candidates.sort(key=lambda c: -c[0])
    # re-sort runs of tied priorities by the deterministic tie-break
    start = 0
    for i in range(1, len(candidates) + 1):
        if i == len(candidates) or not _tied(candidates[i][0], candidates[i - 1][0]):
            if i - start > 1:
                candidates[start:i] = sorted(
                    candidates[start:i], key=lambda c: (-c[1], c[2], c[3])
                )
            start = i
    for _, _, label, _ in candidates[:remaining]:
        sizes[label] += 1
    return sizes


def wright_allocation(
    summaries: Iterable[StratumSummary],
    nsample: int,
    *,
    min_per_stratum: int = 2,
    allow_small: bool = False,
) -> pd.DataFrame:
    """Exact integer optimum allocation via greedy priority values.

    ``min_per_stratum`` is 1 or 2: with 2, every stratum can report a
    within-stratum variance. Strata smaller than the floor are rejected
    unless ``allow_small`` is set, in which case their floor (and cap) is
    their population. The reported ``stratum_fraction`` is the realised
    stratum_size / nsample.
    """
    if min_per_stratum not in (1, 2):
        raise DataError(f"min_per_stratum must be 1 or 2, got {min_per_stratum!r}")
    entries = _validate_summaries(summaries)
    floors: dict[str, int] = {}
    for s in entries:
        if s.npop < min_per_stratum:
            if not allow_small:
                raise StratumTooSmall(
                    f"stratum {s.label!r} has npop {s.npop}, below the floor of "
                    f"{min_per_stratum}; pass allow_small to cap it at its population"
                )
            floors[s.label] = s.npop
        else:
            floors[s.label] = min_per_stratum
    nsample = _validate_budget(nsample, entries)
    floor_total = sum(floors.values())
    if nsample < floor_total:
        raise BudgetBelowFloor(
            f"requested sample of {nsample} cannot give every stratum its floor "
            f"({floor_total} units in total)"
        )
    sizes = _wright_sizes(entries, nsample, floors)
    fractions = [sizes[s.label] / nsample for s in entries]
    return _design_table(entries, fractions, sizes)


_METHODS = {
    "neyman": "neyman",
    "wright1": "wright1",
    "wrighti": "wright1",
    "wright2": "wright2",
    "wrightii": "wright2",
}


def optimum_allocation(
    data: pd.DataFrame | Iterable[StratumSummary],
    *,
    method: str = "WrightII",
    strata_col: str | None = None,
    y_col: str | None = None,
    sd_col: str | None = None,
    npop_col: str | None = None,
    nsample: int | None = None,
    allow_small: bool = False,
) -> pd.DataFrame:
    """Allocate a sample over strata from unit-level or summary-level input.

    Exactly one input shape must be supplied: a unit table (``strata_col``
    plus ``y_col``) from which summaries are computed, or summary input
    (``strata_col`` plus ``sd_col`` and ``npop_col``, or a list of
    :class:`StratumSummary`). Both shapes produce identical designs for
    identical counts and sds. ``method`` is one of ``Neyman``, ``WrightI``
    or ``WrightII`` (case-insensitive).
    """
    key = _METHODS.get(str(method).lower())
    if key is None:
        raise DataError(f"unknown allocation method {method!r}; expected Neyman, WrightI or WrightII")
    summaries = _coerce_allocation_input(data, strata_col, y_col, sd_col, npop_col)
    if key == "neyman":
        return neyman_allocation(summaries, nsample)
    if nsample is None:
        raise DataError(f"method {method!r} computes integer sizes and requires nsample")
    floor = 1 if key == "wright1" else 2
    return wright_allocation(summaries, nsample, min_per_stratum=floor, allow_small=allow_small)


def _coerce_allocation_input(
    data: pd.DataFrame | Iterable[StratumSummary],
    strata_col: str | None,
    y_col: str | None,
    sd_col: str | None,
    npop_col: str | None,
) -> list[StratumSummary]:
    if not isinstance(data, pd.DataFrame):
        entries = list(data)
        if not all(isinstance(e, StratumSummary) for e in entries):
            raise DataError("data must be a DataFrame or an iterable of StratumSummary")
        if y_col is not None or sd_col is not None:
            raise AmbiguousInput("column arguments do not apply to StratumSummary input")
        return entries
    unit_shape = y_col is not None
    summary_shape = sd_col is not None or npop_col is not None
    if unit_shape and summary_shape:
        raise AmbiguousInput(
            "supply either y_col (unit-level input) or sd_col and npop_col "
            "(summary-level input), not both"
        )
    if not unit_shape and not summary_shape:
        raise AmbiguousInput("supply y_col for unit-level input or sd_col and npop_col for summaries")
    if strata_col is None:
        raise DataError("strata_col is required for DataFrame input")
    if unit_shape:
        return summarize_strata(data, strata_col, y_col)
    if sd_col is None or npop_col is None:
        raise DataError("summary-level input requires both sd_col and npop_col")
    for col in (strata_col, sd_col, npop_col):
        if col not in data.columns:
            raise ColumnNotFound(f"column {col!r} not found in summary table")
    out = []
    for _, row in data.iterrows():
        npop = row[npop_col]
        if pd.isna(npop) or float(npop) != int(npop):
            raise DataError(f"stratum {row[strata_col]!r}: npop must be a whole number, got {npop!r}")
        out.append(StratumSummary(str(row[strata_col]), int(npop), float(row[sd_col])))
    return out


def estimator_variance(
    summaries: Iterable[StratumSummary],
    allocation: Mapping[str, int] | Sequence[int] | pd.DataFrame,
) -> VarianceReport:
    """Variance of the stratified total under a given integer allocation.

    ``allocation`` maps stratum label to size; a sequence is taken in the
    order of ``summaries``, and a design table uses its ``strata`` and
    ``stratum_size`` columns.
    """
    entries = list(summaries)
    sizes = _coerce_allocation(allocation, entries)
    sampling_terms = []
    fpc_terms = []
    for s in entries:
        n_h = sizes[str(s.label)]
        if n_h == 0:
            raise ZeroAllocation(f"stratum {s.label!r} has allocation 0; its variance term is undefined")
        if n_h < 0:
            raise DataError(f"stratum {s.label!r} has negative allocation {n_h}")
        weight = s.npop * s.sd
        sampling_terms.append(weight * weight / n_h)
        fpc_terms.append(weight * weight / s.npop)
    # fsum keeps the result independent of stratum order, so allocations
    # that are permutations of one another report identical variances
    fpc = math.fsum(fpc_terms)
    return VarianceReport(variance=math.fsum(sampling_terms) - fpc, finite_population_term=fpc)


def _coerce_allocation(
    allocation: Mapping[str, int] | Sequence[int] | pd.DataFrame,
    entries: Sequence[StratumSummary],
) -> dict[str, int]:
    if isinstance(allocation, pd.DataFrame):
        for col in ("strata", "stratum_size"):
            if col not in allocation.columns:
                raise ColumnNotFound(f"design table lacks a {col!r} column")
        return {str(r["strata"]): int(r["stratum_size"]) for _, r in allocation.iterrows()}
    if isinstance(allocation, Mapping):
        sizes = {str(k): int(v) for k, v in allocation.items()}
        missing = [s.label for s in entries if str(s.label) not in sizes]
        if missing:
            raise ShapeMismatch(f"allocation lacks strata: {', '.join(missing)}")
        return sizes
    values = list(allocation)
    if len(values) != len(entries):
        raise ShapeMismatch(
            f"allocation has {len(values)} entries for {len(entries)} strata"
        )
    return {str(s.label): int(v) for s, v in zip(entries, values)}


def allocate_wave(
    summaries: Iterable[StratumSummary],
    prior: Mapping[str, int],
    nsample: int,
    *,
    detailed: bool = False,
) -> pd.DataFrame:
    """Optimum allocation of a new wave on top of already-sampled strata.

    The exact integer optimum is computed for the cumulative total
    (sum of ``prior`` plus ``nsample``) with a floor of 2 per stratum.
    Strata whose prior count already exceeds their cumulative optimum are
    frozen at the prior (samples cannot be returned) and the optimum is
    recomputed over the remaining strata and budget until no stratum is
    oversampled. When the budget of a run cannot give every remaining
    stratum the floor of 2, the floor relaxes to the prior count for
    strata with fewer than 2 prior samples.

    The result has one row per stratum with columns ``npop``,
    ``nsample_optimal`` (the first full optimum), ``nsample_actual``,
    ``nsample_prior`` and ``n_to_sample``; ``detailed`` appends the sd.
    """
    entries = _validate_summaries(summaries)
    labels = {s.label for s in entries}
    prior_clean: dict[str, int] = {s.label: 0 for s in entries}
    for key, value in dict(prior).items():
        label = str(key)
        if label not in labels:
            raise DataError(f"prior counts name an unknown stratum: {label!r}")
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 0:
            raise DataError(f"prior count for stratum {label!r} must be a nonnegative integer")
        prior_clean[label] = int(value)
    by_label = {s.label: s for s in entries}
    for label, count in prior_clean.items():
        if count > by_label[label].npop:
            raise DataError(
                f"stratum {label!r} has prior count {count} above its population {by_label[label].npop}"
            )
    if not isinstance(nsample, (int, np.integer)) or isinstance(nsample, bool) or nsample < 1:
        raise DataError(f"nsample must be a positive integer, got {nsample!r}")
    total = sum(prior_clean.values()) + int(nsample)
    total_npop = sum(s.npop for s in entries)
    if total > total_npop:
        raise BudgetExceedsPopulation(
            f"prior samples plus the new wave ({total}) exceed the population of {total_npop}"
        )

    active = list(entries)
    frozen: dict[str, int] = {}
    budget = total
    optimal_full: dict[str, int] | None = None
    sizes: dict[str, int] = {}
    while active:
        floors = {s.label: min(2, s.npop) for s in active}
        if sum(floors.values()) > budget:
            floors = {
                s.label: min(floors[s.label], prior_clean[s.label])
                if prior_clean[s.label] < 2
                else floors[s.label]
                for s in active
            }
        sizes = _wright_sizes(active, budget, floors)
        if optimal_full is None:
            optimal_full = dict(sizes)
        oversampled = [s for s in active if prior_clean[s.label] > sizes[s.label]]
        if not oversampled:
            break
        for s in oversampled:
            frozen[s.label] = prior_clean[s.label]
            budget -= prior_clean[s.label]
        active = [s for s in active if s.label not in frozen]

    actual = {s.label: sizes.get(s.label, 0) for s in entries}
    actual.update(frozen)
    assert optimal_full is not None
    table = pd.DataFrame(
        {
            "strata": [s.label for s in entries],
            "npop": [s.npop for s in entries],
            "nsample_optimal": [optimal_full[s.label] for s in entries],
            "nsample_actual": [actual[s.label] for s in entries],
            "nsample_prior": [prior_clean[s.label] for s in entries],
            "n_to_sample": [actual[s.label] - prior_clean[s.label] for s in entries],
        }
    )
    if detailed:
        table["sd"] = [s.sd for s in entries]
    return table


def wave_history(
    units: pd.DataFrame,
    strata_col: str,
    y_col: str,
    already_sampled: str,
) -> tuple[list[StratumSummary], dict[str, int]]:
    """Summaries and prior counts for :func:`allocate_wave` from unit data.

    ``already_sampled`` names a 0/1 indicator column; standard deviations
    are estimated from the sampled rows only (the survey variable is
    typically observed nowhere else), while ``npop`` counts all rows.
    """
    for col in (strata_col, y_col, already_sampled):
        if col not in units.columns:
            raise ColumnNotFound(f"column {col!r} not found in unit table")
    indicator = units[already_sampled]
    if indicator.isna().any():
        raise MissingValues(f"column {already_sampled!r} has missing values; expected 0 or 1")
    values = set(pd.unique(indicator))
    if not values <= {0, 1}:
        raise DataError(f"column {already_sampled!r} must contain only 0 and 1")
    if not pd.api.types.is_numeric_dtype(units[y_col]):
        raise DataError(f"column {y_col!r} must be numeric to compute standard deviations")
    strata = units[strata_col]
    if strata.isna().any():
        raise MissingValues(f"strata column {strata_col!r} has missing values")
    summaries = []
    prior: dict[str, int] = {}
    for label, grp in units.groupby(strata.astype(str), sort=True):
        sampled = grp[grp[already_sampled] == 1]
        observed = sampled[y_col].dropna()
        if len(observed) < 2:
            raise InsufficientData(
                f"stratum {label!r} has {len(observed)} sampled value(s) of {y_col!r}; "
                "at least 2 are needed to estimate its standard deviation"
            )
        sd = float(np.std(observed.to_numpy(dtype=float), ddof=1))
        summaries.append(StratumSummary(str(label), int(len(grp)), sd))
        prior[str(label)] = int(len(sampled))
    return summaries, prior
