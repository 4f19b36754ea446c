"""Exception types shared across the package.

Two families matter for callers: :class:`DataError` for problems with the
supplied tables or arguments (bad columns, duplicate ids, malformed files)
and :class:`InfeasibleDesign` for requests that no valid design can satisfy
(budget too small, degenerate variance, empty strata pieces). The CLI maps
the families to distinct exit codes; the HTTP service maps them to status
codes.
"""

from __future__ import annotations


class StratwaveError(Exception):
    """Base class for every error raised by this package."""


class DataError(StratwaveError):
    """The input data or arguments are unusable as given."""


class InfeasibleDesign(StratwaveError):
    """No design satisfies the request."""


# -- data errors --------------------------------------------------------

class ColumnNotFound(DataError):
    pass


class InsufficientData(DataError):
    pass


class AmbiguousInput(DataError):
    pass


class UnknownStratum(DataError):
    pass


class LabelCollision(DataError):
    pass


class DuplicateId(DataError):
    pass


class UnknownId(DataError):
    pass


class ParseError(DataError):
    pass


class EmptyInput(DataError):
    pass


class MissingValues(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class UnknownLocation(DataError):
    pass


class WaveRequired(DataError):
    pass


class SlotTypeMismatch(DataError):
    pass


class MissingArgument(DataError):
    pass


# -- infeasible designs --------------------------------------------------

class DegenerateVariance(InfeasibleDesign):
    pass


class BudgetExceedsPopulation(InfeasibleDesign):
    pass


class BudgetBelowFloor(InfeasibleDesign):
    pass


class ZeroAllocation(InfeasibleDesign):
    pass


class StratumTooSmall(InfeasibleDesign):
    pass


class EmptyStratumPiece(InfeasibleDesign):
    pass


class InsufficientUnits(InfeasibleDesign):
    pass


class FitDiverged(InfeasibleDesign):
    pass


class SingularInformation(InfeasibleDesign):
    pass
