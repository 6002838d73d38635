"""Counterfactual program evaluation on panel data.

A treated unit's no-intervention outcome is predicted from a greedily
selected handful of control units fit on the pre-treatment window; the
average post-treatment gap is tested with a heteroskedasticity- and
autocorrelation-robust t-statistic. Includes an L1-penalized baseline,
an exhaustive best-subset cross-check, and a Monte Carlo lab.
"""

from .exceptions import (
    CombinatorialExplosionError,
    ConfigError,
    DataError,
    DimensionMismatchError,
    EmptyPathError,
    EmptySetError,
    FspdaError,
    IndexOutOfRangeError,
    InfeasibleError,
    InvalidIndexError,
    InvalidPanelError,
    MissingColumnError,
    NonFiniteValueError,
    NonPositiveLrvError,
    NumericError,
    ParseError,
    RankDeficientError,
    TooFewRowsError,
    TreatmentMarkerNotFoundError,
)
from .inference import (
    EffectReport,
    ate_test,
    bartlett_lrv,
    default_lag,
    hac_lrv,
    predict_counterfactual,
)
from .io import (
    EstimateRequest,
    cmd_estimate,
    cmd_oracle_check,
    cmd_simulate,
    load_panel,
    parse_scenario,
    read_panel_csv,
    write_panel,
)
from .lasso import (
    ConvergenceWarning,
    LassoFit,
    lambda_grid,
    lambda_max,
    lasso_fit,
    lasso_path_bic,
)
from .panel import PanelData
from .regression import DesignMatrix, OlsFit, gram_min_eigenvalue, ols_fit
from .selection import (
    BicChoice,
    FittedModel,
    SelectionPath,
    SelectionStep,
    best_subset_oracle,
    default_r_max,
    fit_selected,
    forward_select,
    modified_bic_r,
)
from .simulation import (
    DgpConfig,
    MonteCarloReport,
    SimulatedPanel,
    generate_factors,
    generate_panel,
    generate_replication,
    lasso_as_model,
    run_monte_carlo,
    zstat_sample,
)

__version__ = "0.1.0"

__all__ = [
    "PanelData",
    "DesignMatrix",
    "OlsFit",
    "ols_fit",
    "gram_min_eigenvalue",
    "SelectionStep",
    "SelectionPath",
    "FittedModel",
    "BicChoice",
    "forward_select",
    "modified_bic_r",
    "fit_selected",
    "best_subset_oracle",
    "default_r_max",
    "LassoFit",
    "ConvergenceWarning",
    "lasso_fit",
    "lasso_path_bic",
    "lambda_max",
    "lambda_grid",
    "EffectReport",
    "predict_counterfactual",
    "hac_lrv",
    "bartlett_lrv",
    "default_lag",
    "ate_test",
    "DgpConfig",
    "SimulatedPanel",
    "MonteCarloReport",
    "generate_factors",
    "generate_panel",
    "generate_replication",
    "run_monte_carlo",
    "zstat_sample",
    "lasso_as_model",
    "EstimateRequest",
    "load_panel",
    "read_panel_csv",
    "write_panel",
    "parse_scenario",
    "cmd_estimate",
    "cmd_simulate",
    "cmd_oracle_check",
    "FspdaError",
    "DataError",
    "NumericError",
    "RankDeficientError",
    "NonPositiveLrvError",
    "InfeasibleError",
    "CombinatorialExplosionError",
    "DimensionMismatchError",
    "EmptySetError",
    "InvalidIndexError",
    "IndexOutOfRangeError",
    "InvalidPanelError",
    "EmptyPathError",
    "ParseError",
    "MissingColumnError",
    "NonFiniteValueError",
    "TreatmentMarkerNotFoundError",
    "TooFewRowsError",
    "ConfigError",
]
