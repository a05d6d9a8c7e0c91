"""Certification and recovery of block-sparse localization errors.

The package is organized around the pipeline: build a sensor network
(:mod:`network`), form distance or bearing measurements and inject faults
(:mod:`measurement`), linearize into rigidity Jacobians (:mod:`rigidity`),
certify recoverability levels and robustness constants
(:mod:`recoverability`), recover errors with the convexified solver
(:mod:`solver`), and run seeded experiment sweeps (:mod:`harness`).
Small exhaustive ground-truth checks live in :mod:`oracle`.
"""
from __future__ import annotations

from .network import (
    BlockVector,
    Configuration,
    ErrorState,
    SensorGraph,
    ValidationIssue,
    ValidationReport,
    block_norm,
    load_network,
    project_to_plane,
    random_geometric_network,
    restrict_support,
    save_network,
    validate_configuration,
)
from .measurement import (
    FAULT_MODES,
    MEASUREMENT_KINDS,
    DegenerateEdgeError,
    MeasurementSet,
    add_noise,
    bearing_measurements,
    distance_measurements,
    inject_faults,
    measurement_map,
    perturb_positions,
    residual_vector,
    sample_sphere,
)
from .rigidity import (
    NullBasis,
    RigidityMatrix,
    RigidityReport,
    analytic_null_basis,
    bearing_rigidity_matrix,
    distance_rigidity_matrix,
    maximal_rank,
    rigidity_matrix,
    rigidity_report,
    save_matrix_csv,
    skew_generators,
)
from .oracle import (
    NspWorstCase,
    OracleGuardError,
    OracleResult,
    brute_force_block_spark,
    brute_force_l0_recover,
    brute_force_nsp,
)
from .recoverability import (
    NotRigidError,
    NspCertificate,
    NspSearch,
    NspViolatedError,
    RobustConstants,
    c_noise,
    c_stability,
    l0_recovery_limit,
    max_certified_errors,
    max_colinear_count,
    nsp_check,
    nsp_check_2d,
    nsp_check_3d_distance,
    nsp_check_bearing,
    nsp_margin,
    robust_constants,
    sigma_qs,
)
from .solver import (
    BpdnProblem,
    BpdnStatus,
    InfeasibleProblemError,
    RecoveryResult,
    ScpIteration,
    ScpParams,
    SplitCarry,
    as_shrink,
    default_support_threshold,
    group_soft_threshold,
    identify_support,
    scp_recover,
    solve_bpdn,
)
from .harness import (
    SCHEMA_VERSION,
    SWEEP_AXES,
    ScenarioConfig,
    SweepPoint,
    SweepResult,
    TrialRecord,
    aggregate_records,
    build_network,
    default_axis_values,
    monte_carlo_sweep,
    run_trial,
    scenario_at_point,
    shrink_for_noise,
    uav13_network,
)

__version__ = "0.1.0"

__all__ = [
    "BlockVector",
    "Configuration",
    "ErrorState",
    "SensorGraph",
    "ValidationIssue",
    "ValidationReport",
    "block_norm",
    "load_network",
    "project_to_plane",
    "random_geometric_network",
    "restrict_support",
    "save_network",
    "validate_configuration",
    "FAULT_MODES",
    "MEASUREMENT_KINDS",
    "DegenerateEdgeError",
    "MeasurementSet",
    "add_noise",
    "bearing_measurements",
    "distance_measurements",
    "inject_faults",
    "measurement_map",
    "perturb_positions",
    "residual_vector",
    "sample_sphere",
    "NullBasis",
    "RigidityMatrix",
    "RigidityReport",
    "analytic_null_basis",
    "bearing_rigidity_matrix",
    "distance_rigidity_matrix",
    "maximal_rank",
    "rigidity_matrix",
    "rigidity_report",
    "save_matrix_csv",
    "skew_generators",
    "NspWorstCase",
    "OracleGuardError",
    "OracleResult",
    "brute_force_block_spark",
    "brute_force_l0_recover",
    "brute_force_nsp",
    "NotRigidError",
    "NspCertificate",
    "NspSearch",
    "NspViolatedError",
    "RobustConstants",
    "c_noise",
    "c_stability",
    "l0_recovery_limit",
    "max_certified_errors",
    "max_colinear_count",
    "nsp_check",
    "nsp_check_2d",
    "nsp_check_3d_distance",
    "nsp_check_bearing",
    "nsp_margin",
    "robust_constants",
    "sigma_qs",
    "BpdnProblem",
    "BpdnStatus",
    "InfeasibleProblemError",
    "RecoveryResult",
    "ScpIteration",
    "ScpParams",
    "SplitCarry",
    "as_shrink",
    "default_support_threshold",
    "group_soft_threshold",
    "identify_support",
    "scp_recover",
    "solve_bpdn",
    "SCHEMA_VERSION",
    "SWEEP_AXES",
    "ScenarioConfig",
    "SweepPoint",
    "SweepResult",
    "TrialRecord",
    "aggregate_records",
    "build_network",
    "default_axis_values",
    "monte_carlo_sweep",
    "run_trial",
    "scenario_at_point",
    "shrink_for_noise",
    "uav13_network",
    "__version__",
]
