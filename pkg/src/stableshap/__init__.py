"""Variance-stabilized Shapley value estimation.

Monte Carlo Shapley estimates (ordering-based sampling or KernelSHAP) are
corrected with a control variate: the exact Shapley value of a Taylor
expansion of the model at the query point. The correction leaves the
expectation unchanged and removes the share of Monte Carlo variance explained
by the surrogate's correlation with the model.
"""

from .brute import (
    exact_shapley,
    exact_shapley_permutations,
    shapley_weight,
    weight_identity_half,
    weight_identity_total,
)
from .control import ControlledEstimate, anticipated_reduction, combine
from .core import (
    CapabilityError,
    Coalition,
    ConfigurationError,
    Dataset,
    DegenerateDesignError,
    DimensionError,
    FeatureMoments,
    InsufficientDataError,
    InvalidGroupingError,
    Predictor,
    ShapleyEstimate,
    aggregate_categorical,
    child_seed,
    coalition_from_mask,
)
from .estimators import (
    KernelDraws,
    KernelShapResult,
    PermutationDraw,
    ShapleySamplingResult,
    kernel_sample_coalitions,
    kernelshap,
    kernelshap_projection,
    kernelshap_solve,
    kernelshap_values,
    shapley_sampling,
    shapley_sampling_all,
)
from .experiments import ExperimentConfig, ExperimentReport, run_experiment
from .metrics import efficiency_gap, rank_changes, var_reduc
from .models import (
    DecisionTree,
    FiniteDifferenceConfig,
    FiniteDifferenceModel,
    LogisticRegressionModel,
    MlpModel,
    TreeEnsembleModel,
    analytic_gradient,
    analytic_hessian,
    fd_gradient,
    fd_hessian,
    load_model,
    save_model,
    train_logistic,
    train_mlp,
    train_tree_ensemble,
    with_finite_differences,
)
from .simdata import SimulatedData, block_covariance, generate_sim_dataset
from .surrogates import (
    DjPrecompute,
    ProjectionSet,
    TaylorSurrogate,
    build_projection_set,
    compute_dj_exact,
    compute_dj_mc,
    dj_cache_key,
    ensure_dj,
    linear_shapley,
    load_dj,
    quadratic_shapley,
    save_dj,
)
from .values import (
    ExactPairedValues,
    GaussianConditioner,
    MonteCarloPairedValues,
    PairedBatch,
    PairedValue,
    ValueFunctionConfig,
    conditional_gaussian,
    evaluate_value,
    exact_value_linear,
    exact_value_quadratic,
)
from .variance import (
    CovEstimate,
    IncrementRecord,
    ks_bootstrap_cov,
    ks_grouped_cov,
    ks_least_squares_cov,
    ss_cov,
    ss_cov_all,
)

__version__ = "0.1.0"
