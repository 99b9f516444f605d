"""Aggregated kernel tests on incomplete U-statistics with wild-bootstrap calibration.

Two-sample (MMD), independence (HSIC) and goodness-of-fit (KSD) tests whose
cost is set by the design size ``L``: linear in the sample size for
``L ~ c N``, quadratic for the full design.
"""

__version__ = "0.1.0"

from .design import Design, full_design, make_design, random_design, subdiagonal_design
from .estimator import HSICAggInc, KSDAggInc, MMDAggInc
from .estimators import (
    HValueCache,
    PairedData,
    cache_h_values,
    complete_hsic,
    complete_ksd,
    complete_mmd,
    incomplete_statistic,
    pair_gof,
    pair_independence,
    pair_two_sample,
    rademacher_signs,
    wild_bootstrap_statistics,
)
from .exceptions import ConfigError, DegenerateDataError, InputError
from .kernels import KernelSpec, ScoreModel, eval_kernel, gaussian_score_model, h_hsic, h_ksd, h_mmd, median_bandwidth
from .testing import (
    AggTestResult,
    BandwidthCollection,
    TestConfig,
    aggregated_test,
    bootstrap_quantile,
    compute_u_alpha,
    hsic_collection,
    mmd_ksd_collection,
    single_test,
    theoretical_collection,
)

__all__ = [
    "AggTestResult",
    "BandwidthCollection",
    "ConfigError",
    "DegenerateDataError",
    "Design",
    "HSICAggInc",
    "HValueCache",
    "InputError",
    "KSDAggInc",
    "KernelSpec",
    "MMDAggInc",
    "PairedData",
    "ScoreModel",
    "TestConfig",
    "aggregated_test",
    "bootstrap_quantile",
    "cache_h_values",
    "complete_hsic",
    "complete_ksd",
    "complete_mmd",
    "compute_u_alpha",
    "eval_kernel",
    "full_design",
    "gaussian_score_model",
    "h_hsic",
    "h_ksd",
    "h_mmd",
    "hsic_collection",
    "incomplete_statistic",
    "make_design",
    "median_bandwidth",
    "mmd_ksd_collection",
    "pair_gof",
    "pair_independence",
    "pair_two_sample",
    "rademacher_signs",
    "random_design",
    "single_test",
    "subdiagonal_design",
    "theoretical_collection",
    "wild_bootstrap_statistics",
]
