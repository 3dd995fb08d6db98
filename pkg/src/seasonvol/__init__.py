"""Seasonal stochastic-volatility modelling of commodity futures.

Building blocks: seasonal variance mean levels and their exponential
transforms, square-root variance path simulation, the joint characteristic
function of two futures log-returns, Fourier option pricing, state-space
Kalman filtering, and maximum-likelihood estimation with model-selection
statistics.
"""

from .charfn import CfRequest, OdeSolution, joint_cf, joint_cf_grid, single_cf, single_cf_grid, solve_factor_odes
from .cir import ComparisonReport, SimPaths, TerminalSample, comparison_check, simulate, terminal_sample
from .data import (
    FuturesPanel,
    ObservationSeries,
    PanelSummary,
    ingest,
    summarize,
    to_constant_maturity,
    to_log_prices,
    to_returns,
)
from .errors import ConfigError, ConvergenceError, NumericalError
from .estimation import (
    FitOptions,
    FitReport,
    LrTestResult,
    ModelRanking,
    aic,
    bic,
    default_init,
    fit,
    inverse_transform,
    lr_tests,
    rank_models,
    transform_params,
)
from .kalman import FilterOutput, SmoothedOutput, export_states, run_filter, smooth
from .params import FactorParams, ModelParams
from .pricing import SpreadSpec, VanillaSpec, price_calendar_spread, price_european, price_european_grid
from .seasonality import (
    Pattern,
    SeasonalitySpec,
    eval_theta,
    theta_max,
    theta_min,
    transform_theta,
)
from .statespace import ObservationMode, StateVector, SystemMatrices, build_system
from .synthetic import synthetic_panel

__version__ = "0.1.0"

__all__ = [
    "CfRequest", "OdeSolution", "joint_cf", "joint_cf_grid", "single_cf",
    "single_cf_grid", "solve_factor_odes",
    "ComparisonReport", "SimPaths", "TerminalSample", "comparison_check",
    "simulate", "terminal_sample",
    "FuturesPanel", "ObservationSeries", "PanelSummary", "ingest", "summarize",
    "to_constant_maturity", "to_log_prices", "to_returns",
    "ConfigError", "ConvergenceError", "NumericalError",
    "FitOptions", "FitReport", "LrTestResult", "ModelRanking", "aic", "bic",
    "default_init", "fit", "inverse_transform", "lr_tests", "rank_models",
    "transform_params",
    "FilterOutput", "SmoothedOutput", "export_states", "run_filter", "smooth",
    "FactorParams", "ModelParams",
    "SpreadSpec", "VanillaSpec", "price_calendar_spread", "price_european",
    "price_european_grid",
    "Pattern", "SeasonalitySpec", "eval_theta", "theta_max", "theta_min",
    "transform_theta",
    "ObservationMode", "StateVector", "SystemMatrices", "build_system",
    "synthetic_panel",
    "__version__",
]
