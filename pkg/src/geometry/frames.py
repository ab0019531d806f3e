"""
Frame Module

Orthonormal frames (t_vec, n_vec, b_vec) along a moving curve.

Analytic frames come straight from the curve's closure. For curves without
one, RotationMinimizingFrame propagates a seed normal along s with the
double-reflection construction: one reflection in the bisector plane of two
consecutive points, a second one that realigns the tangent. Frenet frames are
not used because they degenerate on straight pieces.
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .curves import CurveSpec

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Frame:
    """
    Orthonormal triple at one curve point.

    Attributes:
        t_vec: Unit tangent
        n_vec: Unit normal
        b_vec: Unit binormal, t_vec x n_vec
    """
    t_vec: np.ndarray
    n_vec: np.ndarray
    b_vec: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Rotation with columns (t_vec, n_vec, b_vec)."""
        return np.column_stack([self.t_vec, self.n_vec, self.b_vec])

    def orthonormality_error(self) -> float:
        """Largest deviation of the Gram matrix from the identity."""
        m = self.matrix
        return float(np.abs(m.T @ m - np.eye(3)).max())

    def orientation(self) -> float:
        """det(t_vec, n_vec, b_vec); +1 for a positively oriented frame."""
        return float(np.linalg.det(self.matrix))

    def to_dict(self) -> Dict[str, list]:
        return {"t_vec": self.t_vec.tolist(), "n_vec": self.n_vec.tolist(), "b_vec": self.b_vec.tolist()}


def centered_difference(f: Callable[[np.ndarray], np.ndarray], x, step: float) -> np.ndarray:
    """Five-point centered first derivative of f at x, fourth order in step."""
    x = np.asarray(x, dtype=float)
    near = f(x + step) - f(x - step)
    far = f(x + 2.0 * step) - f(x - 2.0 * step)
    return (8.0 * near - far) / (12.0 * step)


def unit_tangent(curve: CurveSpec, t, s, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Five-point centered d_s Gamma and its normalisation.

    Returns:
        (d_s Gamma, unit tangent), both of shape (..., 3)
    """
    ds = centered_difference(lambda x: curve(t, x), s, step)
    norm = np.linalg.norm(ds, axis=-1, keepdims=True)
    return ds, ds / np.where(norm > 0, norm, 1.0)


def _row_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def double_reflection(
    x0: np.ndarray, t0: np.ndarray, r0: np.ndarray,
    x1: np.ndarray, t1: np.ndarray,
) -> np.ndarray:
    """
    Transport the normal r0 at (x0, t0) to (x1, t1).

    All arguments are (..., 3) arrays; the result is re-orthonormalised
    against t1.
    """
    v1 = x1 - x0
    c1 = _row_dot(v1, v1)[..., None]
    safe1 = np.where(c1 > 1e-300, c1, 1.0)
    r_l = np.where(c1 > 1e-300, r0 - (2.0 / safe1) * _row_dot(v1, r0)[..., None] * v1, r0)
    t_l = np.where(c1 > 1e-300, t0 - (2.0 / safe1) * _row_dot(v1, t0)[..., None] * v1, t0)

    v2 = t1 - t_l
    c2 = _row_dot(v2, v2)[..., None]
    safe2 = np.where(c2 > 1e-300, c2, 1.0)
    r1 = np.where(c2 > 1e-300, r_l - (2.0 / safe2) * _row_dot(v2, r_l)[..., None] * v2, r_l)

    r1 = r1 - _row_dot(r1, t1)[..., None] * t1
    return r1 / np.linalg.norm(r1, axis=-1, keepdims=True)


class RotationMinimizingFrame:
    """
    Rotation-minimizing frame of a moving curve.

    Node frames are propagated once per time t on a uniform s lattice and
    cached; a query at arbitrary s applies one more double-reflection step
    from the node just below it. Evaluation is deterministic for a fixed
    node count.

    Usage:
        rmf = RotationMinimizingFrame(curve, s_min=-0.1, s_max=1.1)
        t_vec, n_vec, b_vec = rmf(0.0, np.linspace(0, 1, 5))
    """

    def __init__(
        self,
        curve: CurveSpec,
        s_min: float,
        s_max: float,
        n_nodes: int = 2048,
        fd_step: float = 1e-3,
        seed_normal: Optional[np.ndarray] = None,
        cache_size: int = 64,
    ):
        """
        Initialize the frame propagator.

        Args:
            curve: Curve to frame
            s_min, s_max: Interval covered by the node lattice
            n_nodes: Lattice size
            fd_step: Step of the five-point tangent difference
            seed_normal: Normal at s_min (projected onto the normal plane);
                by default the least aligned coordinate axis
            cache_size: Number of time slices kept
        """
        if s_max <= s_min:
            raise ValueError("s_max must exceed s_min")
        self.curve = curve
        self.s_nodes = np.linspace(s_min, s_max, n_nodes)
        self.fd_step = fd_step
        self.seed_normal = None if seed_normal is None else np.asarray(seed_normal, dtype=float)
        self.cache_size = cache_size
        self._cache: "OrderedDict[float, Tuple[np.ndarray, np.ndarray, np.ndarray]]" = OrderedDict()
        self._lock = threading.Lock()

    def _seed(self, t0: np.ndarray) -> np.ndarray:
        if self.seed_normal is not None:
            ref = self.seed_normal
        else:
            ref = np.eye(3)[np.argmin(np.abs(t0))]
        r = ref - np.dot(ref, t0) * t0
        norm = np.linalg.norm(r)
        if norm < 1e-12:
            raise ValueError("Seed normal is parallel to the tangent")
        return r / norm

    def nodes(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Positions, tangents and normals at the lattice nodes for time t."""
        key = float(t)
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]

        x = self.curve(key, self.s_nodes)
        _, tan = unit_tangent(self.curve, key, self.s_nodes, self.fd_step)
        normals = np.empty_like(x)
        normals[0] = self._seed(tan[0])
        for i in range(len(self.s_nodes) - 1):
            normals[i + 1] = double_reflection(x[i], tan[i], normals[i], x[i + 1], tan[i + 1])

        with self._lock:
            self._cache[key] = (x, tan, normals)
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        logger.debug(f"Propagated rotation-minimizing frame for t={key:.6g} on {len(self.s_nodes)} nodes")
        return x, tan, normals

    def __call__(self, t: float, s) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Frame at (t, s) for scalar t and array s.

        Returns:
            (t_vec, n_vec, b_vec), each of shape s.shape + (3,)
        """
        s = np.asarray(s, dtype=float)
        x_n, t_n, r_n = self.nodes(t)
        idx = np.clip(np.searchsorted(self.s_nodes, s, side="right") - 1, 0, len(self.s_nodes) - 2)

        x1 = self.curve(t, s)
        _, t1 = unit_tangent(self.curve, t, s, self.fd_step)
        n1 = double_reflection(x_n[idx], t_n[idx], r_n[idx], x1, t1)
        b1 = np.cross(t1, n1)
        return t1, n1, b1
