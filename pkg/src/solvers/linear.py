"""
Linear Solver Module

Jacobi-preconditioned BiCGStab for the nonsymmetric finite-volume systems of
both solvers. Iterations follow a fixed order, so a given system and initial
guess always produce the same iterate sequence.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab

from ..exceptions import SolverError

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class LinearSystem:
    """
    Sparse system A x = b with an optional initial guess.

    Attributes:
        matrix: Sparse CSR matrix
        rhs: Right-hand side
        x0: Initial guess (defaults to zero)
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    x0: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class SolveStats:
    """
    Outcome of one linear solve.

    Attributes:
        iterations: BiCGStab iterations
        residual: Final relative residual ||b - A x|| / ||b||
        history: Relative residual after each iteration
    """
    iterations: int = 0
    residual: float = 0.0
    history: List[float] = field(default_factory=list)


def jacobi_preconditioner(matrix: sp.spmatrix) -> LinearOperator:
    """Diagonal (Jacobi) preconditioner; zero diagonal entries are left unscaled."""
    diag = matrix.diagonal()
    inv = np.where(np.abs(diag) > 0, 1.0 / np.where(diag == 0, 1.0, diag), 1.0)
    return LinearOperator(matrix.shape, matvec=lambda x: inv * np.ravel(x), dtype=float)


def linear_solve(
    system: LinearSystem,
    tolerance: float = 1e-12,
    max_iterations: int = 2000,
) -> Tuple[np.ndarray, SolveStats]:
    """
    Solve the system with preconditioned BiCGStab.

    Args:
        system: Assembled system
        tolerance: Relative residual tolerance
        max_iterations: Iteration cap

    Returns:
        (solution, SolveStats)

    Raises:
        SolverError: If BiCGStab does not converge, with the residual history
    """
    A = system.matrix.tocsr()
    b = np.asarray(system.rhs, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), SolveStats()

    history: List[float] = []

    def record(xk):
        history.append(float(np.linalg.norm(b - A @ xk)) / b_norm)

    x, info = bicgstab(
        A,
        b,
        x0=system.x0,
        rtol=tolerance,
        atol=0.0,
        maxiter=max_iterations,
        M=jacobi_preconditioner(A),
        callback=record,
    )
    residual = float(np.linalg.norm(b - A @ x)) / b_norm
    if info != 0 or not np.all(np.isfinite(x)):
        raise SolverError(
            f"BiCGStab stopped with info={info} after {len(history)} iterations, residual {residual:.3e}",
            residual_history=history,
            info=int(info),
        )
    logger.debug(f"BiCGStab converged in {len(history)} iterations (residual {residual:.2e})")
    return x, SolveStats(iterations=len(history), residual=residual, history=history)
