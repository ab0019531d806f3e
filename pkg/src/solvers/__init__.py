"""
Approximating and limit solvers.
"""

from .approx import ApproxSolver, BulkField, SolveConfig, energy_report, run_approx
from .limit import CurveField, LimitConfig, LimitSolver, XiPair, run_limit, weak_residual, xi_closure

__all__ = [
    "ApproxSolver",
    "BulkField",
    "SolveConfig",
    "energy_report",
    "run_approx",
    "CurveField",
    "LimitConfig",
    "LimitSolver",
    "XiPair",
    "run_limit",
    "weak_residual",
    "xi_closure",
]
