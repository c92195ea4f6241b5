"""Dual regression models on observations and labels, with permutation
tests, an SVM trained from scratch, and voxelwise statistic maps."""

__version__ = "0.1.0"

from .datagen import SyntheticDataset, generate_dg1, generate_dg2, make_covariance
from .duality import (
    DualPair,
    normalization_scalar,
    reconstruct_observations,
    svm_regressed_observations,
    theta_from_w,
    w_from_theta,
)
from .glm import (
    Contrast,
    DesignMatrix,
    GlmFit,
    NoiseCov,
    fit_glm_ls,
    fit_glm_ml,
    indicator_design,
    residual_sum_squares,
    t_pvalue,
    t_statistic,
)
from .inference import (
    BoundParams,
    TestOutcome,
    corrected_accuracy,
    delta_bound,
    kfold_cv_error,
    permutation_test,
    t_cv_statistic,
    t_res_statistic,
)
from .lrm import (
    LrmFit,
    classify_rows,
    empirical_error,
    fit_lrm,
    fit_multiclass,
    predict_labels,
)
from .svm import (
    BinaryLabels,
    SvmModel,
    decision,
    labels_from_indicator,
    svm_row_parameters,
    train_linear_svm,
)
from .voxelwise import (
    StatMap,
    Volume,
    VoxelTestConfig,
    calibrate_threshold,
    run_voxel_tests,
    threshold_map,
)

__all__ = [
    "BinaryLabels",
    "BoundParams",
    "Contrast",
    "DesignMatrix",
    "DualPair",
    "GlmFit",
    "LrmFit",
    "NoiseCov",
    "StatMap",
    "SvmModel",
    "SyntheticDataset",
    "TestOutcome",
    "VoxelTestConfig",
    "Volume",
    "calibrate_threshold",
    "classify_rows",
    "corrected_accuracy",
    "decision",
    "delta_bound",
    "empirical_error",
    "fit_glm_ls",
    "fit_glm_ml",
    "fit_lrm",
    "fit_multiclass",
    "generate_dg1",
    "generate_dg2",
    "indicator_design",
    "kfold_cv_error",
    "labels_from_indicator",
    "make_covariance",
    "normalization_scalar",
    "permutation_test",
    "predict_labels",
    "reconstruct_observations",
    "residual_sum_squares",
    "run_voxel_tests",
    "svm_regressed_observations",
    "svm_row_parameters",
    "t_cv_statistic",
    "t_pvalue",
    "t_res_statistic",
    "t_statistic",
    "theta_from_w",
    "threshold_map",
    "train_linear_svm",
    "w_from_theta",
]
