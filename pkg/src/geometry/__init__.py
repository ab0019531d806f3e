"""
Curves, frames and the moving tube chart.
"""

from .curves import CurveSpec, FrameMode, build_curve, load_polyline, make_arc, make_segment
from .frames import Frame, RotationMinimizingFrame
from .chart import TubeChart

__all__ = [
    "CurveSpec",
    "FrameMode",
    "build_curve",
    "load_polyline",
    "make_arc",
    "make_segment",
    "Frame",
    "RotationMinimizingFrame",
    "TubeChart",
]
