"""
Configuration modules for the concentrated-capacity lab.
"""

from .settings import (
    GEOMETRY_CONFIG,
    CAPACITY_CONFIG,
    MATERIAL_CONFIG,
    QUADRATURE_CONFIG,
    SOLVER_CONFIG,
    LIMIT_CONFIG,
    LADDER_CONFIG,
    HARNESS_CONFIG,
    OUTPUT_CONFIG,
)
from .run_config import RunConfig, get_default_config, get_section, load_run_config, save_run_config

__all__ = [
    "GEOMETRY_CONFIG",
    "CAPACITY_CONFIG",
    "MATERIAL_CONFIG",
    "QUADRATURE_CONFIG",
    "SOLVER_CONFIG",
    "LIMIT_CONFIG",
    "LADDER_CONFIG",
    "HARNESS_CONFIG",
    "OUTPUT_CONFIG",
    "RunConfig",
    "get_default_config",
    "get_section",
    "load_run_config",
    "save_run_config",
]
