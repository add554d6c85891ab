"""Frechet regression and partial-effect testing for SPD-matrix responses
under the Bures-Wasserstein metric."""

from .errors import (
    BwfrechetError,
    IllConditionedError,
    InvalidConfigError,
    InvalidInputError,
    NoConvergenceError,
    SingularError,
    UnreliableResultError,
)
from .frechet import (
    CovariateMoments,
    Dataset,
    FitResult,
    SolverOptions,
    frechet_regress,
    hessian_operator,
    regression_weights,
    weighted_frechet_mean,
)
from .manifold import (
    EPS_PD,
    SymOperator,
    check_spd,
    ot_map,
    ot_map_differential,
    solve_sylvester,
    sym_basis,
    sym_coords,
    sym_dim,
    sym_from_coords,
    sym_part,
    sym_sqrt,
    wasserstein_distance,
)
from .partial_test import (
    FirstHalfFit,
    SplitDataset,
    TestDiagnostics,
    TestOptions,
    TestResult,
    fit_first_half,
    gram_kernel,
    impute_z,
    imputation_adjustment,
    imputed_covariates,
    influence_kernel_matrix,
    influence_matrix,
    kernel_matrix,
    mixture_quantile,
    no_split_statistic,
    null_eigenvalues,
    p_value,
    run_partial_test,
    split_dataset,
    test_statistic,
)
from .simgen import (
    MEAN_ABS_V,
    MEAN_SQ_V,
    GroundTruth,
    SimConfig,
    generate,
    haar_orthogonal,
    population_qstar,
    true_qstar,
)
from .experiments import (
    ConsistencyResult,
    ExperimentConfig,
    PowerCurveResult,
    SizeStudyResult,
    TrialRecord,
    clopper_pearson,
    mixture_ks_distance,
    pooled_eigenvalues,
    qq_data,
    run_consistency_study,
    run_power_curve,
    run_size_study,
    trial_seeds,
)
from .dataio import (
    dataset_checksum,
    load_dataset,
    load_result,
    write_dataset,
    write_result,
)

__version__ = "0.1.0"

__all__ = [
    "BwfrechetError",
    "IllConditionedError",
    "InvalidConfigError",
    "InvalidInputError",
    "NoConvergenceError",
    "SingularError",
    "UnreliableResultError",
    "CovariateMoments",
    "Dataset",
    "FitResult",
    "SolverOptions",
    "frechet_regress",
    "hessian_operator",
    "regression_weights",
    "weighted_frechet_mean",
    "EPS_PD",
    "SymOperator",
    "check_spd",
    "ot_map",
    "ot_map_differential",
    "solve_sylvester",
    "sym_basis",
    "sym_coords",
    "sym_dim",
    "sym_from_coords",
    "sym_part",
    "sym_sqrt",
    "wasserstein_distance",
    "FirstHalfFit",
    "SplitDataset",
    "TestDiagnostics",
    "TestOptions",
    "TestResult",
    "fit_first_half",
    "gram_kernel",
    "impute_z",
    "imputation_adjustment",
    "imputed_covariates",
    "influence_kernel_matrix",
    "influence_matrix",
    "kernel_matrix",
    "mixture_quantile",
    "no_split_statistic",
    "null_eigenvalues",
    "p_value",
    "run_partial_test",
    "split_dataset",
    "test_statistic",
    "MEAN_ABS_V",
    "MEAN_SQ_V",
    "GroundTruth",
    "SimConfig",
    "generate",
    "haar_orthogonal",
    "population_qstar",
    "true_qstar",
    "ConsistencyResult",
    "ExperimentConfig",
    "PowerCurveResult",
    "SizeStudyResult",
    "TrialRecord",
    "clopper_pearson",
    "mixture_ks_distance",
    "pooled_eigenvalues",
    "qq_data",
    "run_consistency_study",
    "run_power_curve",
    "run_size_study",
    "trial_seeds",
    "dataset_checksum",
    "load_dataset",
    "load_result",
    "write_dataset",
    "write_result",
    "__version__",
]
