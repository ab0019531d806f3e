"""
Structured Grids

Grid3D is a uniform cell-centered grid over an axis-aligned box Omega; cells
are flattened in C order (x slowest, z fastest). Grid1D is the node mesh of
the curve field on s in [0, 1].
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Grid3D:
    """
    Uniform cell-centered grid.

    Attributes:
        bounds: ((x0, x1), (y0, y1), (z0, z1))
        shape: (n_x, n_y, n_z)
    """
    bounds: Tuple[Tuple[float, float], ...]
    shape: Tuple[int, int, int]

    def __post_init__(self):
        if len(self.bounds) != 3 or len(self.shape) != 3:
            raise ValueError("Grid3D needs three bounds and three resolutions")
        if any(b[1] <= b[0] for b in self.bounds):
            raise ValueError(f"Degenerate bounds {self.bounds}")
        if any(int(n) < 1 for n in self.shape):
            raise ValueError(f"Resolutions must be positive, got {self.shape}")
        object.__setattr__(self, "bounds", tuple((float(b[0]), float(b[1])) for b in self.bounds))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))

    @classmethod
    def cube(cls, n: int, bounds: Sequence[Sequence[float]] = ((0, 1), (0, 1), (0, 1))) -> "Grid3D":
        return cls(tuple(tuple(b) for b in bounds), (n, n, n))

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell-center coordinates along each axis."""
        h = self.spacing
        return tuple(self.lower[k] + h[k] * (np.arange(self.shape[k]) + 0.5) for k in range(3))

    def cell_centers(self) -> np.ndarray:
        """(n_cells, 3) array of cell centers in flattening order."""
        X, Y, Z = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.all((points >= self.lower - tol) & (points <= self.upper + tol), axis=-1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """
        Flat index of the cell containing each point, -1 outside Omega.

        Points on the upper boundary belong to the last cell.
        """
        points = np.asarray(points, dtype=float)
        ijk = np.floor((points - self.lower) / self.spacing).astype(np.int64)
        n = np.array(self.shape)
        on_upper = np.isclose(points, self.upper, rtol=0, atol=1e-12)
        ijk = np.where(on_upper & (ijk == n), n - 1, ijk)
        valid = np.all((ijk >= 0) & (ijk < n), axis=-1)
        flat = np.ravel_multi_index(tuple(np.clip(ijk, 0, n - 1).T), self.shape)
        return np.where(valid, flat, -1)

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.shape + np.shape(values)[1:])

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Central-difference gradient of cell values, shape (n_cells, 3)."""
        h = self.spacing
        cube = self.reshape(values)
        grads = []
        for k in range(3):
            if self.shape[k] < 2:
                grads.append(np.zeros_like(cube))
            else:
                grads.append(np.gradient(cube, h[k], axis=k))
        return np.stack([g.ravel() for g in grads], axis=-1)

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint rule over the cells."""
        return float(np.sum(values) * self.cell_volume)


@dataclass(frozen=True)
class Grid1D:
    """
    Node mesh on s in [0, 1].

    Attributes:
        n_s: Number of nodes, endpoints included
    """
    n_s: int

    def __post_init__(self):
        if self.n_s < 2:
            raise ValueError("Grid1D needs at least two nodes")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_s)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_s - 1)

    @property
    def midpoints(self) -> np.ndarray:
        nodes = self.nodes
        return 0.5 * (nodes[1:] + nodes[:-1])

    @property
    def control_lengths(self) -> np.ndarray:
        """Control-volume lengths (half cells at both ends); sum to 1."""
        ell = np.full(self.n_s, self.spacing)
        ell[0] = ell[-1] = 0.5 * self.spacing
        return ell

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoid rule over the nodes."""
        return float(np.dot(self.control_lengths, values))
