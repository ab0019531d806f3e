"""
Tube-Coordinate Quadrature Module

Quadrature over regions of chart coordinates (s, nu, omega), weighted by
J_F when mapped to Omega:

- core: [0, 1] x D_eps
- collar: [0 < d_eps < delta], split into the lateral shell rho = eps + delta eta,
  the two end caps s = -delta eta and s = 1 + delta eta, and the two
  quarter-torus rims around (s = 0, rho = eps) and (s = 1, rho = eps);
  each piece is a graph over the core boundary so delta is resolved
  analytically whatever its size
- support: core and collar together (where zeta > 0)
- full-tube: [0, 1] x D_eps0
- chart-domain: [-eps0, 1 + eps0] x D_eps0

On top of it: the gap measure, the capacity pairing and its limit target,
cross-section disk averages of grid fields, deposits of tube integrals into
grid cells and the regularized line delta.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from ..coefficients.fields import dist_core, zeta_coords
from ..coefficients.params import CapacityParams
from ..exceptions import DomainError
from ..geometry.chart import TubeChart
from .grids import Grid1D, Grid3D

if TYPE_CHECKING:
    from ..solvers.approx import BulkField

# Configure logging
logger = logging.getLogger(__name__)

TubeIntegrand = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class Region(Enum):
    """Integration regions in chart coordinates."""
    CORE = "core"
    COLLAR = "collar"
    SUPPORT = "support"
    FULL_TUBE = "full-tube"
    CHART_DOMAIN = "chart-domain"


@dataclass(frozen=True)
class QuadratureDensity:
    """
    Node counts of the tube quadrature.

    Attributes:
        n_radial: Gauss-Legendre nodes across a disk radius
        n_angular: Uniform nodes around the disk
        n_axial: Gauss-Legendre nodes along s on [0, 1]
        n_collar: Gauss-Legendre nodes across the collar width (>= 8)
    """
    n_radial: int = 16
    n_angular: int = 32
    n_axial: int = 256
    n_collar: int = 8

    def __post_init__(self):
        if min(self.n_radial, self.n_angular, self.n_axial) < 1:
            raise ValueError("Quadrature node counts must be positive")
        if self.n_collar < 8:
            raise ValueError("The collar needs at least 8 nodes across its width")

    @classmethod
    def from_config(cls, config: Dict[str, Any], n_s: int = 64) -> "QuadratureDensity":
        return cls(
            n_radial=int(config["n_radial"]),
            n_angular=int(config["n_angular"]),
            n_axial=int(config["axial_per_node"]) * int(n_s),
            n_collar=int(config["n_collar"]),
        )

    def resolving(self, spacing: float, radius: float, length: float, nodes_per_cell: int = 3) -> "QuadratureDensity":
        """
        Density with at least nodes_per_cell nodes per grid spacing.

        Args:
            spacing: Smallest grid spacing
            radius: Largest disk radius to cover
            length: Arc length of the curve piece
        """
        return replace(
            self,
            n_radial=max(self.n_radial, math.ceil(nodes_per_cell * radius / spacing)),
            n_angular=max(self.n_angular, math.ceil(nodes_per_cell * 2 * math.pi * radius / spacing)),
            n_axial=max(self.n_axial, math.ceil(nodes_per_cell * length / spacing)),
        )


@dataclass
class TubeNodes:
    """
    Quadrature nodes in chart coordinates.

    Attributes:
        s, nu, om: Node coordinates (flat arrays)
        weight: Flat (unmapped) weights, i.e. without J_F
    """
    s: np.ndarray
    nu: np.ndarray
    om: np.ndarray
    weight: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    @staticmethod
    def concat(*parts: "TubeNodes") -> "TubeNodes":
        return TubeNodes(
            np.concatenate([p.s for p in parts]),
            np.concatenate([p.nu for p in parts]),
            np.concatenate([p.om for p in parts]),
            np.concatenate([p.weight for p in parts]),
        )


def gauss(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def disk_nodes(radius: float, n_radial: int, n_angular: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(nu, omega, weight) on D_radius; weights sum to pi radius^2."""
    rho, w_rho = gauss(n_radial, 0.0, radius)
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    R, TH = np.meshgrid(rho, th, indexing="ij")
    W = (w_rho * rho)[:, None] * np.full(n_angular, 2 * np.pi / n_angular)[None, :]
    return (R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel(), W.ravel()


def _cylinder(s0: float, s1: float, radius: float, density: QuadratureDensity, n_axial: Optional[int] = None) -> TubeNodes:
    s, w_s = gauss(n_axial or density.n_axial, s0, s1)
    nu, om, w_d = disk_nodes(radius, density.n_radial, density.n_angular)
    S = np.repeat(s, len(nu))
    return TubeNodes(S, np.tile(nu, len(s)), np.tile(om, len(s)), np.outer(w_s, w_d).ravel())


def collar_nodes(eps: float, delta: float, density: QuadratureDensity) -> TubeNodes:
    """Nodes of [0 < d_eps < delta] in its lateral, cap and rim pieces."""
    eta, w_eta = gauss(density.n_collar, 0.0, 1.0)
    th = 2 * np.pi * np.arange(density.n_angular) / density.n_angular
    w_th = 2 * np.pi / density.n_angular
    cos_th, sin_th = np.cos(th), np.sin(th)

    def revolve(s: np.ndarray, rho: np.ndarray, w: np.ndarray) -> TubeNodes:
        # (s, rho) half-plane nodes revolved around the axis; w excludes rho
        return TubeNodes(
            np.repeat(s, len(th)),
            (rho[:, None] * cos_th[None, :]).ravel(),
            (rho[:, None] * sin_th[None, :]).ravel(),
            np.repeat(w * rho * w_th, len(th)),
        )

    # lateral shell rho = eps + delta eta over s in [0, 1]
    s_ax, w_ax = gauss(density.n_axial, 0.0, 1.0)
    S, E = np.meshgrid(s_ax, eta, indexing="ij")
    lateral = revolve(S.ravel(), eps + delta * E.ravel(), np.outer(w_ax, delta * w_eta).ravel())

    # end caps s = -delta eta and s = 1 + delta eta over rho in [0, eps]
    rho, w_rho = gauss(density.n_radial, 0.0, eps)
    E, Rr = np.meshgrid(eta, rho, indexing="ij")
    w_cap = np.outer(delta * w_eta, w_rho).ravel()
    cap0 = revolve(-delta * E.ravel(), Rr.ravel(), w_cap)
    cap1 = revolve(1.0 + delta * E.ravel(), Rr.ravel(), w_cap)

    # quarter-torus rims: s = -l cos(phi) (or 1 + l cos(phi)), rho = eps + l sin(phi)
    ell, w_ell = gauss(density.n_collar, 0.0, delta)
    phi, w_phi = gauss(density.n_collar, 0.0, 0.5 * np.pi)
    L, P = np.meshgrid(ell, phi, indexing="ij")
    w_rim = (np.outer(w_ell, w_phi) * L).ravel()
    rho_rim = eps + (L * np.sin(P)).ravel()
    rim0 = revolve(-(L * np.cos(P)).ravel(), rho_rim, w_rim)
    rim1 = revolve(1.0 + (L * np.cos(P)).ravel(), rho_rim, w_rim)

    return TubeNodes.concat(lateral, cap0, cap1, rim0, rim1)


def tube_nodes(
    region: Union[Region, str],
    eps0: float,
    p: Optional[CapacityParams] = None,
    density: Optional[QuadratureDensity] = None,
) -> TubeNodes:
    """
    Quadrature nodes of a region.

    Raises:
        ValueError: If core/collar/support is requested without CapacityParams
    """
    region = Region(region)
    density = density or QuadratureDensity()
    if region is Region.FULL_TUBE:
        return _cylinder(0.0, 1.0, eps0, density)
    if region is Region.CHART_DOMAIN:
        return _cylinder(-eps0, 1.0 + eps0, eps0, density)
    if p is None:
        raise ValueError(f"Region '{region.value}' needs CapacityParams")
    if region is Region.CORE:
        return _cylinder(0.0, 1.0, p.eps, density)
    if region is Region.COLLAR:
        return collar_nodes(p.eps, p.delta, density)
    return TubeNodes.concat(_cylinder(0.0, 1.0, p.eps, density), collar_nodes(p.eps, p.delta, density))


def tube_integral(
    chart: TubeChart,
    f: TubeIntegrand,
    t: float,
    region: Union[Region, str] = Region.CORE,
    density: Optional[QuadratureDensity] = None,
    p: Optional[CapacityParams] = None,
) -> float:
    """
    Integral of f(t, s, nu, omega) J_F over a chart region.

    Args:
        chart: Tube chart
        f: Vectorised integrand
        t: Time
        region: core, collar, support, full-tube or chart-domain
        density: Node counts
        p: Capacity parameters (needed for core/collar/support)
    """
    nodes = tube_nodes(region, chart.eps0, p, density)
    J = chart.det_J_F(t, nodes.s, nodes.nu, nodes.om)
    values = np.broadcast_to(f(t, nodes.s, nodes.nu, nodes.om), nodes.s.shape)
    return float(np.sum(values * J * nodes.weight))


def _ones(t, s, nu, om):
    return np.ones_like(s)


# ---------------------------------------------------------------------------
# Gap measure
# ---------------------------------------------------------------------------

def collar_measure_flat(eps: float, delta: float) -> float:
    """
    Exact flat measure of [0 < d_eps < delta].

    pi((eps + delta)^2 - eps^2) + 2 pi eps^2 delta + 2 * 2 pi (eps pi delta^2 / 4 + delta^3 / 3)
    """
    lateral = math.pi * ((eps + delta) ** 2 - eps ** 2)
    caps = 2 * math.pi * eps ** 2 * delta
    rims = 2 * 2 * math.pi * (eps * math.pi * delta ** 2 / 4 + delta ** 3 / 3)
    return lateral + caps + rims


def gap_measure(
    chart: TubeChart,
    p: CapacityParams,
    t: float,
    density: Optional[QuadratureDensity] = None,
) -> Tuple[float, float]:
    """
    Measure of the collar.

    Returns:
        (flat_measure, mapped_measure): the measure in chart coordinates and
        of its image N_(eps, delta) \\ N_(eps, 0) in Omega
    """
    nodes = tube_nodes(Region.COLLAR, chart.eps0, p, density)
    J = chart.det_J_F(t, nodes.s, nodes.nu, nodes.om)
    return float(nodes.weight.sum()), float(np.sum(nodes.weight * J))


def gap_measure_monte_carlo(
    p: CapacityParams,
    n_samples: int = 10_000_000,
    seed: int = 42,
    chunk: int = 1_000_000,
) -> float:
    """
    Rejection-sampling estimate of the flat collar measure.

    Samples the box [-delta, 1 + delta] x [-(eps + delta), eps + delta]^2 in
    chunks and counts hits of 0 < d_eps < delta.
    """
    rng = np.random.default_rng(seed)
    r = p.eps + p.delta
    box = (1 + 2 * p.delta) * (2 * r) ** 2
    hits = 0
    remaining = n_samples
    while remaining > 0:
        n = min(chunk, remaining)
        s = rng.uniform(-p.delta, 1 + p.delta, n)
        nu = rng.uniform(-r, r, n)
        om = rng.uniform(-r, r, n)
        d = dist_core(p, s, nu, om)
        hits += int(np.count_nonzero((d > 0) & (d < p.delta)))
        remaining -= n
    return box * hits / n_samples


# ---------------------------------------------------------------------------
# Capacity pairing and its limit
# ---------------------------------------------------------------------------

def box_integral(f: Callable[[np.ndarray], np.ndarray], bounds, n: int = 24) -> float:
    """Tensor Gauss-Legendre integral of f(x) over an axis-aligned box."""
    nodes = [gauss(n, float(b[0]), float(b[1])) for b in bounds]
    X, Y, Z = np.meshgrid(nodes[0][0], nodes[1][0], nodes[2][0], indexing="ij")
    W = np.einsum("i,j,k->ijk", nodes[0][1], nodes[1][1], nodes[2][1])
    values = f(np.stack([X, Y, Z], axis=-1))
    return float(np.sum(values * W))


def deposit_to_cells(
    chart: TubeChart,
    grid: Grid3D,
    nodes: TubeNodes,
    values: np.ndarray,
    t: float,
) -> np.ndarray:
    """
    Per-cell integrals of values J_F over the nodes.

    Each node adds values * J_F * weight to the cell containing F(t, node);
    nodes mapped outside Omega are dropped.

    Returns:
        (n_cells,) array of cell integrals (not averages)
    """
    points = chart.point(t, nodes.s, nodes.nu, nodes.om)
    J = chart.det_J_F(t, nodes.s, nodes.nu, nodes.om)
    idx = grid.locate(points)
    ok = idx >= 0
    if not np.all(ok):
        logger.debug(f"{np.count_nonzero(~ok)} of {len(idx)} tube nodes fall outside Omega and are dropped")
    contrib = np.asarray(values, dtype=float) * J * nodes.weight
    if contrib.ndim == 1:
        return np.bincount(idx[ok], weights=contrib[ok], minlength=grid.n_cells)
    flat = contrib.reshape(len(idx), -1)
    out = np.stack(
        [np.bincount(idx[ok], weights=flat[ok, k], minlength=grid.n_cells) for k in range(flat.shape[1])],
        axis=-1,
    )
    return out.reshape((grid.n_cells,) + contrib.shape[1:])


def zeta_cell_integrals(
    chart: TubeChart,
    p: CapacityParams,
    grid: Grid3D,
    t: float,
    density: Optional[QuadratureDensity] = None,
    nodes_per_cell: int = 3,
) -> np.ndarray:
    """Integral of zeta over each cell, from tube nodes resolving the grid."""
    density = (density or QuadratureDensity()).resolving(
        float(grid.spacing.min()), p.eps + p.delta, float(chart.speed(t, np.linspace(0, 1, 33)).max()), nodes_per_cell
    )
    nodes = tube_nodes(Region.SUPPORT, chart.eps0, p, density)
    return deposit_to_cells(chart, grid, nodes, zeta_coords(p, nodes.s, nodes.nu, nodes.om), t)


def capacity_pairing(
    chart: TubeChart,
    p: CapacityParams,
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    grid: Grid3D,
    mode: str = "tube",
    density: Optional[QuadratureDensity] = None,
) -> float:
    """
    Pairing of a_(eps, delta)(t; .) with a continuous f.

    mode "tube" uses the split int f dx + (eps0^2/eps^2 - 1) int zeta (f o F) J_F
    over the support of zeta; mode "grid" sums cell averages of a against f
    at the cell centers of grid.
    """
    if mode == "tube":
        nodes = tube_nodes(Region.SUPPORT, chart.eps0, p, density)
        J = chart.det_J_F(t, nodes.s, nodes.nu, nodes.om)
        points = chart.point(t, nodes.s, nodes.nu, nodes.om)
        inside = grid.contains(points)
        fx = np.where(inside, f(points), 0.0)
        z = zeta_coords(p, nodes.s, nodes.nu, nodes.om)
        return box_integral(f, grid.bounds) + (p.contrast - 1.0) * float(np.sum(z * fx * J * nodes.weight))
    if mode == "grid":
        fraction = np.clip(zeta_cell_integrals(chart, p, grid, t, density) / grid.cell_volume, 0.0, 1.0)
        a_cells = 1.0 + (p.contrast - 1.0) * fraction
        return grid.integrate(a_cells * f(grid.cell_centers()))
    raise ValueError(f"Unknown pairing mode '{mode}' (use 'tube' or 'grid')")


def capacity_limit_target(
    chart: TubeChart,
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    grid: Grid3D,
    n_gauss: int = 64,
) -> float:
    """int_Omega f dx + pi eps0^2 int_0^1 (f o Gamma) |d_s Gamma| ds."""
    s, w = gauss(n_gauss, 0.0, 1.0)
    line = float(np.sum(f(chart.eval_curve(t, s)) * chart.speed(t, s) * w))
    return box_integral(f, grid.bounds) + math.pi * chart.eps0 ** 2 * line


# ---------------------------------------------------------------------------
# Cross-section averages
# ---------------------------------------------------------------------------

def _interpolator(grid: Grid3D, values: np.ndarray) -> RegularGridInterpolator:
    return RegularGridInterpolator(grid.axes(), grid.reshape(values), method="linear", bounds_error=False, fill_value=None)


def disk_average(
    chart: TubeChart,
    field: "BulkField",
    t: float,
    s: Union[float, np.ndarray],
    eps: float,
    density: Optional[QuadratureDensity] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cross-section averages over D_eps at fixed (t, s).

    The field is interpolated trilinearly from cell centers; the
    (s, nu, omega)-gradient is grad F^T applied to the interpolated
    central-difference gradient.

    Returns:
        (value, grad3): shapes () and (3,) for scalar s, (n,) and (n, 3) otherwise

    Raises:
        DomainError: If a disk leaves Omega
    """
    density = density or QuadratureDensity()
    grid = field.grid
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    nu, om, w = disk_nodes(eps, density.n_radial, density.n_angular)
    S = np.repeat(s[:, None], len(nu), axis=1)
    NU = np.broadcast_to(nu, S.shape)
    OM = np.broadcast_to(om, S.shape)

    points = chart.point(t, S, NU, OM)
    outside = ~grid.contains(points, tol=1e-9)
    if np.any(outside):
        i, j = np.argwhere(outside)[0]
        raise DomainError(f"Averaging disk at s={s[i]:.4g} (radius {eps}) leaves Omega at {points[i, j]}")

    u = _interpolator(grid, field.values)(points)
    grad_x = _interpolator(grid, grid.gradient(field.values))(points)
    grad_chart = np.einsum("...ji,...j->...i", chart.grad_F(t, S, NU, OM), grad_x)

    total = w.sum()
    value = (u * w).sum(axis=-1) / total
    grad3 = (grad_chart * w[:, None]).sum(axis=-2) / total
    if scalar:
        return value[0], grad3[0]
    return value, grad3


# ---------------------------------------------------------------------------
# Regularized line delta
# ---------------------------------------------------------------------------

def line_delta_weights(
    chart: TubeChart,
    grid: Grid3D,
    grid1: Grid1D,
    t: float,
    r_avg: float,
    nodes_per_cell: int = 3,
) -> sp.csc_matrix:
    """
    Cell weights of a radius-r_avg tube around each curve-mesh node.

    Column j holds the volume fractions of the tube piece over node j's
    control interval, normalised to sum to one, so W^T u is the disk-tube
    average of a cell field and W q spreads a unit line density over cells.

    Returns:
        Sparse (n_cells, n_s) matrix

    Raises:
        DomainError: If a node's tube piece misses Omega entirely
    """
    if r_avg > chart.eps0:
        logger.warning(f"Exchange radius {r_avg:.4g} exceeds eps0={chart.eps0}; capped at eps0")
        r_avg = chart.eps0
    h = float(grid.spacing.min())
    n_rad = max(3, math.ceil(nodes_per_cell * r_avg / h))
    n_ang = max(8, math.ceil(nodes_per_cell * 2 * math.pi * r_avg / h))
    nu, om, w_d = disk_nodes(r_avg, n_rad, n_ang)

    nodes = grid1.nodes
    half = 0.5 * grid1.spacing
    speed = float(chart.speed(t, nodes).max())
    n_ax = max(2, math.ceil(nodes_per_cell * speed * grid1.spacing / h))

    rows, cols, vals = [], [], []
    for j, s_j in enumerate(nodes):
        s, w_s = gauss(n_ax, max(0.0, s_j - half), min(1.0, s_j + half))
        S = np.repeat(s, len(nu))
        NU = np.tile(nu, len(s))
        OM = np.tile(om, len(s))
        W = np.outer(w_s, w_d).ravel() * chart.det_J_F(t, S, NU, OM)
        idx = grid.locate(chart.point(t, S, NU, OM))
        ok = idx >= 0
        if not np.any(ok):
            raise DomainError(f"Exchange tube around s={s_j:.4g} lies outside Omega")
        rows.append(idx[ok])
        cols.append(np.full(np.count_nonzero(ok), j))
        vals.append(W[ok])

    W = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_cells, grid1.n_s),
    ).tocsc()
    W.sum_duplicates()
    col_sums = np.asarray(W.sum(axis=0)).ravel()
    return (W @ sp.diags(1.0 / col_sums)).tocsc()
