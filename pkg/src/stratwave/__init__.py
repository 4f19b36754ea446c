"""Stratified survey design: split strata, allocate, sample, iterate.

The pieces compose in the order a multi-wave survey runs them: shape the
strata (:mod:`stratwave.strata`), choose stratum sample sizes
(:mod:`stratwave.allocation`), draw reproducible samples
(:mod:`stratwave.sampling`), and track the whole study in a workflow
document (:mod:`stratwave.workflow`) that persists to a JSON file
(:mod:`stratwave.persistence`). :mod:`stratwave.influence` turns a
logistic model into per-unit influence values whose spread can drive the
allocation of a follow-up phase.
"""

from .allocation import (
    StratumSummary,
    VarianceReport,
    allocate_wave,
    estimator_variance,
    neyman_allocation,
    optimum_allocation,
    summarize_strata,
    wave_history,
    wright_allocation,
)
from .errors import (
    AmbiguousInput,
    BudgetBelowFloor,
    BudgetExceedsPopulation,
    ColumnNotFound,
    DataError,
    DegenerateVariance,
    DuplicateId,
    EmptyInput,
    EmptyStratumPiece,
    FitDiverged,
    InfeasibleDesign,
    InsufficientData,
    InsufficientUnits,
    LabelCollision,
    MissingArgument,
    MissingValues,
    ParseError,
    ShapeMismatch,
    SingularInformation,
    SlotTypeMismatch,
    StratumTooSmall,
    StratwaveError,
    UnknownId,
    UnknownLocation,
    UnknownStratum,
    WaveRequired,
    ZeroAllocation,
)
from .influence import (
    LogisticFit,
    fisher_information,
    fit_logistic,
    influence_functions,
)
from .io import (
    build_model_matrix,
    parse_units_text,
    read_units,
    render_float,
    render_table,
    write_units,
)
from .persistence import load_workflow, save_workflow
from .sampling import extract_sampled_ids, sample_strata
from .strata import SplitSpec, merge_strata, quantile, split_strata
from .workflow import (
    Phase,
    Wave,
    WorkflowDoc,
    apply_multiwave,
    get_slot,
    merge_samples,
    new_multiwave,
    resolve_arg,
    set_slot,
    workflow_summary,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # strata
    "SplitSpec",
    "split_strata",
    "merge_strata",
    "quantile",
    # allocation
    "StratumSummary",
    "VarianceReport",
    "summarize_strata",
    "neyman_allocation",
    "wright_allocation",
    "optimum_allocation",
    "estimator_variance",
    "allocate_wave",
    "wave_history",
    # sampling
    "sample_strata",
    "extract_sampled_ids",
    # influence
    "LogisticFit",
    "fit_logistic",
    "fisher_information",
    "influence_functions",
    # workflow
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
    # persistence
    "save_workflow",
    "load_workflow",
    # tables
    "read_units",
    "write_units",
    "parse_units_text",
    "render_table",
    "render_float",
    "build_model_matrix",
    # errors
    "StratwaveError",
    "DataError",
    "InfeasibleDesign",
    "AmbiguousInput",
    "BudgetBelowFloor",
    "BudgetExceedsPopulation",
    "ColumnNotFound",
    "DegenerateVariance",
    "DuplicateId",
    "EmptyInput",
    "EmptyStratumPiece",
    "FitDiverged",
    "InsufficientData",
    "InsufficientUnits",
    "LabelCollision",
    "MissingArgument",
    "MissingValues",
    "ParseError",
    "ShapeMismatch",
    "SingularInformation",
    "SlotTypeMismatch",
    "StratumTooSmall",
    "UnknownId",
    "UnknownLocation",
    "UnknownStratum",
    "WaveRequired",
    "ZeroAllocation",
]
