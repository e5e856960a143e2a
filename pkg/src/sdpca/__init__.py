"""Supervised dynamic PCA forecasting with many predictors.

The pipeline re-scales each predictor by a fitted lagged regression
against the forecast target, extracts principal components from the
re-scaled panel, and regresses the target on the extracted factors
(optionally with an L1 penalty to select the informative ones). The
package also ships the unsupervised PCA, scaled-PCA, diffusion-index,
and AR baselines, simulated data generators, and a rolling-window
evaluation harness.
"""

from .evaluate import (
    EvalReport,
    RollingConfig,
    cross_validate_q,
    insample_msfe,
    monte_carlo_report,
    rolling_rmsfe,
)
from .factors import (
    FactorCountChoice,
    FactorSet,
    extract_factors,
    select_num_factors,
    svd_rotation,
)
from .forecast import (
    ForecastModel,
    LassoConfig,
    ar_fit,
    forecast_method,
    implied_loading_matrix,
    lasso_fit,
    ols_fit,
    post_lasso_refit,
)
from .panel import (
    Panel,
    StandardizationStats,
    TargetSeries,
    apply_tcode,
    apply_transforms,
    ingest_fredmd,
    standardize,
    write_fredmd,
)
from .simulate import SimConfig, SimDraw, generate, population_checks
from .supervise import (
    LaggedFit,
    LagSelection,
    SupervisedScaling,
    build_scaled_panel,
    fit_lagged_regression,
    insample_r2_scan,
    select_lag,
)

__all__ = [
    "EvalReport",
    "FactorCountChoice",
    "FactorSet",
    "ForecastModel",
    "LaggedFit",
    "LagSelection",
    "LassoConfig",
    "Panel",
    "RollingConfig",
    "SimConfig",
    "SimDraw",
    "StandardizationStats",
    "SupervisedScaling",
    "TargetSeries",
    "apply_tcode",
    "apply_transforms",
    "ar_fit",
    "build_scaled_panel",
    "cross_validate_q",
    "extract_factors",
    "fit_lagged_regression",
    "forecast_method",
    "generate",
    "implied_loading_matrix",
    "ingest_fredmd",
    "insample_msfe",
    "insample_r2_scan",
    "lasso_fit",
    "monte_carlo_report",
    "ols_fit",
    "population_checks",
    "post_lasso_refit",
    "rolling_rmsfe",
    "select_lag",
    "select_num_factors",
    "standardize",
    "svd_rotation",
    "write_fredmd",
]
