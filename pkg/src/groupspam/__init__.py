"""Group sparse additive models fitted by block coordinate descent over kernel smoothers."""

from .core import (Dataset, FittedModel, GroupStructure, SolverConfig, SolverError, center,
                   empirical_norm, group_norm)
from .modelsel import PathResult, SupportMetrics, fit_path, lambda_grid, lambda_max, support_metrics, test_mse, validation_mse
from .overlap import collapse_latent, expand_overlap, fit_overlap
from .simgen import Scenario, SimulatedData, make_scenario, true_component
from .smoother import SmootherSet, build_smoother, plugin_bandwidth, predict_component, smooth
from .solver import (fit, fit_backfit, fit_groupspam, fit_spam, fixed_point_solve,
                     group_threshold_check, stationarity_residual)

__version__ = "0.1.0"
