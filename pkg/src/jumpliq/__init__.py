"""Optimal liquidation with Poisson-timed dark-pool fills.

Closed-form value function and feedback control of a quadratic control
problem with an absolute-value jump cost, plus an HJB residual checker, a
Monte Carlo engine and a market layer that maps the problem to dark-pool
execution with adverse selection.
"""

__version__ = "0.1.0"

from .params import DomainError, ModelParams
from .coefficients import (
    CoefficientFrame,
    c0,
    c1,
    c2,
    c3,
    c_nodp,
    coeff_frame,
    coeff_frame_riskneutral,
    mu_kappa,
    x_bar,
)
from .value_surface import Region, ValuePoint, boundary, g_index, value, value_riskneutral
from .control import (
    ControlAction,
    deterministic_trajectory,
    linear_control,
    nodp_control,
    optimal_control,
    trajectory_bound,
)
from .records import PathRecord
from .simulator import CostEstimate, SimConfig, estimate_cost, sample_jump_times, simulate_path, terminal_diagnostics
from .hjb_check import HjbReport, hamiltonian, minimizer_scan, residual_scan
from .market import MarketParams, ProceedsRecord, realized_proceeds, simulate_price, to_model_params

__all__ = [
    "DomainError", "ModelParams", "CoefficientFrame", "c0", "c1", "c2", "c3", "c_nodp", "coeff_frame",
    "coeff_frame_riskneutral", "mu_kappa", "x_bar", "Region", "ValuePoint", "boundary", "g_index", "value",
    "value_riskneutral", "ControlAction", "deterministic_trajectory", "linear_control", "nodp_control",
    "optimal_control", "trajectory_bound", "PathRecord", "CostEstimate", "SimConfig", "estimate_cost",
    "sample_jump_times", "simulate_path", "terminal_diagnostics", "HjbReport", "hamiltonian",
    "minimizer_scan", "residual_scan", "MarketParams", "ProceedsRecord", "realized_proceeds",
    "simulate_price", "to_model_params",
]
