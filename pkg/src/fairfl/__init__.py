"""Facility location and k-median with group-fair outlier removal."""

from .instance import (
    Client,
    Facility,
    IntegralSolution,
    MetricInstance,
    OutlierBudgets,
    Point,
    assign_nearest,
    prune_pairs,
    solution_cost,
    unfairness,
)
from .lp import (
    AGGREGATE,
    PER_GROUP,
    FractionalSolution,
    InfeasibleError,
    IterationLimitError,
    LpError,
    LpModel,
    UnboundedError,
    build_flfo_lp,
    build_gap_instance,
    solve_lp,
    write_mps,
)
from .rounding import (
    PartitionedClients,
    RoundingConfig,
    RoundingError,
    identify_outliers,
    lpr_f,
    lpr_nf,
    lpr_pipeline,
    rescale,
    round_facility_location,
)
from .greedy import DualState, DualTrace, gdf_f, gdf_nf
from .kmedian import (
    GuessGrid,
    PenaltyInstance,
    PenaltySolution,
    build_guess_grid,
    local_search_penalties,
    ls_nf,
    make_penalties,
    r_ls_f,
    r_ls_nf,
)
from .oracle import exact_flfo, exact_kmfo, exact_kmp
from .data import (
    DataError,
    MissingColumnError,
    ParseError,
    RawTable,
    SyntheticConfig,
    build_instance,
    generate_synthetic,
    load_csv,
    normalize,
    sample_clients,
    select_facilities_kmeans,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATE",
    "PER_GROUP",
    "Client",
    "DataError",
    "DualState",
    "DualTrace",
    "Facility",
    "FractionalSolution",
    "GuessGrid",
    "InfeasibleError",
    "IntegralSolution",
    "IterationLimitError",
    "LpError",
    "LpModel",
    "MetricInstance",
    "MissingColumnError",
    "OutlierBudgets",
    "ParseError",
    "PartitionedClients",
    "PenaltyInstance",
    "PenaltySolution",
    "Point",
    "RawTable",
    "RoundingConfig",
    "RoundingError",
    "SyntheticConfig",
    "UnboundedError",
    "assign_nearest",
    "build_flfo_lp",
    "build_gap_instance",
    "build_guess_grid",
    "build_instance",
    "exact_flfo",
    "exact_kmfo",
    "exact_kmp",
    "gdf_f",
    "gdf_nf",
    "generate_synthetic",
    "identify_outliers",
    "load_csv",
    "local_search_penalties",
    "lpr_f",
    "lpr_nf",
    "lpr_pipeline",
    "ls_nf",
    "make_penalties",
    "normalize",
    "prune_pairs",
    "r_ls_f",
    "r_ls_nf",
    "rescale",
    "round_facility_location",
    "sample_clients",
    "select_facilities_kmeans",
    "solution_cost",
    "solve_lp",
    "unfairness",
    "write_mps",
]
