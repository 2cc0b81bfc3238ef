"""Heterogeneity-robust ATE estimators and implied-weight diagnostics for OLS."""

__version__ = "0.1.0"

from .data import Dataset, load_csv, parse_schema, save_csv, stratify
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateStrataError,
    InfeasibleBalanceError,
    LeverageError,
    OlsWeightsError,
    SingularDesignError,
)
from .estimators import (
    EstimateReport,
    estimate_impute,
    estimate_interact,
    estimate_match,
    estimate_reg,
    estimate_stratify,
)
from .balancing import balancing_weights, estimate_meanbal, solve_mean_balance
from .blocks import estimate_block_ame, estimate_block_dim, estimate_block_fe, estimate_block_ipw
from .weights import (
    effective_sample_profile,
    sloczynski_delta,
    strata_weights,
    unit_weights,
)
from .simulation import builtin_dgp, draw_sample, run_monte_carlo
