"""Trajectory planning, flatness-based references and SO(3) MPC tracking for tail-sitters."""

from .aero import AnalyticAeroModel, TableAeroModel, VehicleParams, load_coefficient_table
from .baselines import DubinsPath, L1Guidance, PlanarPose, dubins_shortest, l1_guidance, simulate_planar
from .dynamics import FullInput, VehicleState, simulate, step_rk4
from .flatness import flatness_map, sweep, trim_speed
from .minco import BoundaryCondition, PiecewiseTrajectory, solve_trajectory
from .mpc import MpcConfig, solve_mpc, track
from .planner import plan
from .timeopt import OptimizerConfig, TimeProblem, optimize_times

__version__ = "0.1.0"

__all__ = [
    "AnalyticAeroModel", "TableAeroModel", "VehicleParams", "load_coefficient_table",
    "DubinsPath", "L1Guidance", "PlanarPose", "dubins_shortest", "l1_guidance", "simulate_planar",
    "FullInput", "VehicleState", "simulate", "step_rk4",
    "flatness_map", "sweep", "trim_speed",
    "BoundaryCondition", "PiecewiseTrajectory", "solve_trajectory",
    "MpcConfig", "solve_mpc", "track", "plan",
    "OptimizerConfig", "TimeProblem", "optimize_times",
]
