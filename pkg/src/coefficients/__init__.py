"""
Capacity/material parameters and the concentrated-capacity coefficient fields.
"""

from .params import CapacityParams, DeltaRule, MaterialParams
from .materials import FieldSpec, reference_function
from .fields import capacity_a, diffusivity_K, advection_v, dist_core, zeta

__all__ = [
    "CapacityParams",
    "DeltaRule",
    "MaterialParams",
    "FieldSpec",
    "reference_function",
    "capacity_a",
    "diffusivity_K",
    "advection_v",
    "dist_core",
    "zeta",
]
