"""
Structured grids and tube-coordinate quadrature.
"""

from .grids import Grid1D, Grid3D
from .quadrature import QuadratureDensity, Region, capacity_pairing, disk_average, gap_measure, tube_integral

__all__ = [
    "Grid1D",
    "Grid3D",
    "QuadratureDensity",
    "Region",
    "capacity_pairing",
    "disk_average",
    "gap_measure",
    "tube_integral",
]
