"""
Exception hierarchy for the concentrated-capacity lab.

All errors raised by the geometry, coefficient, mesh and solver layers derive
from CCFlowError so callers (the CLI in particular) can separate lab failures
from programming errors.
"""

from typing import Any, List, Optional, Sequence


class CCFlowError(Exception):
    """Base exception for all lab errors."""
    pass


class DomainError(CCFlowError):
    """A (t, s) pair, chart point or averaging disk lies outside its domain."""
    pass


class DegenerateCurveError(CCFlowError):
    """The curve parameterization has (nearly) vanishing speed |d_s Gamma|."""
    pass


class ChartValidityError(CCFlowError):
    """
    The tube chart is not a valid coordinate system at some point.

    Attributes:
        witness: The offending point, in whatever coordinates the check used
    """

    def __init__(self, message: str, witness: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.witness = None if witness is None else [float(x) for x in witness]


class AssemblyError(CCFlowError):
    """Non-finite coefficients or invalid step data during matrix assembly."""
    pass


class SolverError(CCFlowError):
    """
    The linear solver failed to converge.

    Attributes:
        residual_history: Relative residual after each iteration
        info: Raw status code returned by the Krylov solver
    """

    def __init__(self, message: str, residual_history: Optional[List[float]] = None, info: int = 0):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.info = info


class ConfigError(CCFlowError, ValueError):
    """
    Invalid run configuration.

    Attributes:
        key: Dotted configuration key that failed (e.g. "solver.dt")
    """

    def __init__(self, message: str, key: Optional[str] = None, value: Any = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
        self.value = value
