"""Correlated multivariate discrete data with generalized Poisson, negative
binomial and binomial margins."""

from .calibration import CalibrationOptions, PairCalibration, calibrate_matrix, calibrate_pair
from .collapse import CollapsedMargin, collapse_margin, expand
from .corr_bounds import BoundsReport, check_target_matrix, ep_binary_bounds, gsc_bounds
from .engine import Dataset, GenerationPlan, build_plan, empirical_corr, generate, load_plan, save_plan
from .eval_harness import EvalTable, Scenario, ci_for_estimate, preset_scenarios, run_replication
from .exceptions import (
    CalibrationError,
    DegenerateMarginError,
    EstimationError,
    InfeasibleCorrelationError,
    MultiDiscreteError,
    RepairError,
    SpecError,
)
from .gaussian_core import bvn_cdf, nearest_pd, solve_tetrachoric, std_normal_quantile
from .marginals import (
    Family,
    MarginalSpec,
    TruncatedPmf,
    mom_estimate,
    quantile,
    truncate_support,
    validate_spec,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport", "CalibrationError", "CalibrationOptions", "CollapsedMargin", "Dataset",
    "DegenerateMarginError", "EstimationError", "EvalTable", "Family", "GenerationPlan",
    "InfeasibleCorrelationError", "MarginalSpec", "MultiDiscreteError", "PairCalibration",
    "RepairError", "Scenario", "SpecError", "TruncatedPmf", "build_plan", "bvn_cdf",
    "calibrate_matrix", "calibrate_pair", "check_target_matrix", "ci_for_estimate",
    "collapse_margin", "empirical_corr", "ep_binary_bounds", "expand", "generate",
    "gsc_bounds", "load_plan", "mom_estimate", "nearest_pd", "preset_scenarios", "quantile",
    "run_replication", "save_plan", "solve_tetrachoric", "std_normal_quantile",
    "truncate_support", "validate_spec",
]
