"""
Verification harness: property suites, eps-ladders and reports.
"""

from .ladders import (
    Ladder,
    run_capacity_ladder,
    run_energy_ladder,
    run_limit_comparison,
    run_residual_refinement,
)
from .report import ConvergenceReport, Criterion, ReportWriter
from .scenario import Scenario, build_scenario, thread_count
from .suites import (
    CheckResult,
    SuiteReport,
    run_coefficient_suite,
    run_constant_checks,
    run_distance_suite,
    run_gap_suite,
    run_geometry_suite,
)

__all__ = [
    "Ladder",
    "run_capacity_ladder",
    "run_energy_ladder",
    "run_limit_comparison",
    "run_residual_refinement",
    "ConvergenceReport",
    "Criterion",
    "ReportWriter",
    "Scenario",
    "build_scenario",
    "thread_count",
    "CheckResult",
    "SuiteReport",
    "run_coefficient_suite",
    "run_constant_checks",
    "run_distance_suite",
    "run_gap_suite",
    "run_geometry_suite",
]
