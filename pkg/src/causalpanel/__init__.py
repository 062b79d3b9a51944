"""Granger-causal predictor selection and regularized prediction for panel time series."""

from .dataset import (
    PanelDataset,
    SplitSpec,
    StandardizationParams,
    VariableSpec,
    apply_transforms,
    ingest_csv,
    load_schema,
    split_by_date,
    standardize_apply,
    standardize_fit,
    unstandardize,
)
from .errors import CausalPanelError, NumericalError, ValidationError
from .evaluate import per_entity_errors, rmse_by_date, rmse_mean_over_dates, rmse_overall
from .granger import bivariate_granger, bivariate_scan, conditional_granger, conditional_scan
from .regression import compute_path, fit_lasso, fit_ols, fit_ridge, predict, select_lambda
from .synth import VarProcessSpec, check_stationarity, generate_var_series, make_chain_spec
from .var import aic, build_lag_design, fit_var, select_lag

__version__ = "0.1.0"
