"""Coresets for (j,k)-projective clustering and M-estimator regression."""

from .geometry import (
    AffineFlat,
    ConvexCertificate,
    Ellipsoid,
    PointSet,
    affine_span,
    caratheodory_reduce,
    dist_point_to_flat,
    dists_to_flat,
    ellipsoid_axis_vertices,
    flat_through_points,
    lowner_rounding,
)
from .linf_coreset import (
    JkConfig,
    LevelPartition,
    LinfCoreset,
    VerifyConfig,
    coreset_j1,
    coreset_jk,
    guarantee_bound,
    partition_level0,
    partition_levelt,
    verify_cylinder_coverage,
    verify_linf_ratio,
)
from .losses import (
    LossSpec,
    RegressionInstance,
    check_loglog_lipschitz,
    eval_loss,
    guarantee_factor,
    regression_lift,
    regression_linf_coreset,
)
from .sensitivity import (
    SensitivityMap,
    WeightedCoreset,
    assign_sensitivities,
    l2_coreset,
    sample_l2_coreset,
    sample_with_sensitivity,
)
from .solver import (
    FlatSet,
    SolveConfig,
    approximation_error,
    clustering_cost,
    em_projective,
    fit_flat_weighted,
    robust_regression_solve,
)
from .bench import (
    ExperimentSpec,
    ProblemSpec,
    load_csv,
    run_experiment,
    synthetic_dataset,
    two_center_dataset,
    uniform_baseline,
)

__version__ = "0.1.0"
