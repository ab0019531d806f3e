"""
Concentrated-Capacity Flow Lab

Moving tube charts around curves in 3D, the concentrated-capacity
approximating family of diffusion-advection problems, its coupled bulk/curve
limit and the verification harness comparing the two.
"""

__version__ = "0.1.0"
__author__ = "CCFlow Team"
