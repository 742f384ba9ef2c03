"""Moderate dimension reduction for k-center clustering and its variants,
with brute-force reference solvers and a dynamic geometric streaming engine."""

from .dimred import (
    DEFAULT_C0,
    DEFAULT_C_EXP,
    DEFAULT_C_JL,
    DistortionReport,
    GaussianMap,
    TargetDimParams,
    apply_map,
    distortion_report,
    expansion_probe,
    read_map_text,
    sample_map,
    scaled_for_kcenter,
    tail_probe,
    target_dimension,
    write_map_text,
)
from .errors import (
    AllLevelsFailedError,
    ConstraintInfeasibleError,
    EmptyStreamError,
    OracleBudgetError,
    SamplerDecodeError,
)
from .geometry import (
    DATASET_KINDS,
    DatasetSpec,
    PointSet,
    build_epsilon_net,
    dist_to_set,
    estimate_doubling_dimension,
    generate_dataset,
    pairwise_distances,
    point_set,
    read_pointset_text,
    with_colors,
    write_pointset_text,
)
from .harness import (
    ExperimentConfig,
    RatioRecord,
    ratio_of,
    run_dimred_sweep,
    run_lowerbound_demo,
    run_solver_bench,
    run_streaming_demo,
    write_json,
    write_records_csv,
)
from .solvers import (
    COMBINATION_BUDGET,
    AssignmentConstraint,
    ConstrainedSolution,
    KCenterSolution,
    OutliersSolution,
    anchored_feasible_radius,
    exact_constrained,
    exact_discrete_kcenter,
    exact_discrete_outliers,
    exact_fpq_oracle,
    feasible_assignment,
    feasible_assignment_bruteforce,
    fpq,
    gonzalez,
    kcenter_value,
    peel_witness,
    relaxed_gonzalez,
)
from .streaming import (
    GridKey,
    StreamConfig,
    StreamQueryResult,
    StreamState,
    StreamUpdate,
    cell_budget,
    guess_level_count,
    init_stream,
    process_update,
    query_constrained,
    query_outliers,
    query_vanilla,
    random_stream,
    read_stream_text,
    replay_survivors,
    sample_point,
    space_report,
    write_stream_text,
)

__version__ = "0.1.0"

__all__ = [
    "AllLevelsFailedError",
    "AssignmentConstraint",
    "COMBINATION_BUDGET",
    "ConstrainedSolution",
    "ConstraintInfeasibleError",
    "DATASET_KINDS",
    "DEFAULT_C0",
    "DEFAULT_C_EXP",
    "DEFAULT_C_JL",
    "DatasetSpec",
    "DistortionReport",
    "EmptyStreamError",
    "ExperimentConfig",
    "GaussianMap",
    "GridKey",
    "KCenterSolution",
    "OracleBudgetError",
    "OutliersSolution",
    "PointSet",
    "RatioRecord",
    "SamplerDecodeError",
    "StreamConfig",
    "StreamQueryResult",
    "StreamState",
    "StreamUpdate",
    "TargetDimParams",
    "anchored_feasible_radius",
    "apply_map",
    "build_epsilon_net",
    "cell_budget",
    "dist_to_set",
    "distortion_report",
    "estimate_doubling_dimension",
    "exact_constrained",
    "exact_discrete_kcenter",
    "exact_discrete_outliers",
    "exact_fpq_oracle",
    "expansion_probe",
    "feasible_assignment",
    "feasible_assignment_bruteforce",
    "fpq",
    "generate_dataset",
    "gonzalez",
    "guess_level_count",
    "init_stream",
    "kcenter_value",
    "pairwise_distances",
    "peel_witness",
    "point_set",
    "process_update",
    "query_constrained",
    "query_outliers",
    "query_vanilla",
    "random_stream",
    "ratio_of",
    "read_map_text",
    "read_pointset_text",
    "read_stream_text",
    "relaxed_gonzalez",
    "replay_survivors",
    "run_dimred_sweep",
    "run_lowerbound_demo",
    "run_solver_bench",
    "run_streaming_demo",
    "sample_map",
    "sample_point",
    "scaled_for_kcenter",
    "space_report",
    "tail_probe",
    "target_dimension",
    "with_colors",
    "write_json",
    "write_map_text",
    "write_pointset_text",
    "write_records_csv",
]
