"""
Limit Solver Module

Coupled bulk/curve solver for the concentrated-capacity limit and a weak
residual that tests any bulk/curve pair against the limit identity.

The bulk field u solves d_t u - k0 lap u + div(u v) = 0 on the grid with a
line-concentrated exchange term; the curve field u_C solves

    d_t(u_C g) + d_s(g alpha u_C - (k_s / g) d_s u_C) = lambda (u_bar - u_C) g

on the curve mesh, with g = |d_s Gamma|, alpha = e1 . grad F^-1 (v_C - d_t F)
at (s, 0, 0) and u_bar the disk-tube average of u around each node. The
exchange enters the two equations with opposite totals, so the combined mass
sum V u + pi eps0^2 sum ell g u_C is conserved by construction. Both curve
ends carry zero total flux.
"""

import logging
import math
import time as _time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from ..coefficients.params import MaterialParams
from ..exceptions import DomainError
from ..geometry.chart import TubeChart
from ..mesh.grids import Grid1D, Grid3D
from ..mesh.quadrature import line_delta_weights
from .approx import BulkField, CellCoefficients, SolveConfig, assemble_system
from .linear import LinearSystem, SolveStats, linear_solve

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class CurveField:
    """
    Curve concentration u_C at the Grid1D nodes.

    Attributes:
        grid: Curve mesh
        values: One value per node
        time: Time stamp
    """
    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_s,):
            raise ValueError(f"CurveField needs {self.grid.n_s} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"CurveField at t={self.time} has non-finite values")


@dataclass
class XiPair:
    """Transverse gradient closures xi_nu, xi_omega at the curve nodes."""
    nu: np.ndarray
    om: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.nu)) and np.all(np.isfinite(self.om))):
            raise ValueError(f"XiPair at t={self.time} has non-finite values")


@dataclass
class LimitConfig:
    """
    Limit-solver settings.

    Attributes:
        n_s: Curve mesh nodes
        r_avg_cells: Exchange averaging radius in grid cells
        lambda_ex: Exchange coefficient; 0 selects k0 / r_avg^2
    """
    n_s: int = 64
    r_avg_cells: float = 2.0
    lambda_ex: float = 0.0

    def __post_init__(self):
        if self.n_s < 2:
            raise ValueError("n_s must be at least 2")
        if not self.r_avg_cells > 0:
            raise ValueError("r_avg_cells must be positive")
        if self.lambda_ex < 0:
            raise ValueError("lambda_ex must be non-negative")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "LimitConfig":
        return cls(int(config["n_s"]), float(config["r_avg_cells"]), float(config["lambda_ex"]))

    def resolve(self, grid: Grid3D, k0: float, eps0: float) -> Tuple[float, float]:
        """(r_avg, lambda_ex) for a grid; r_avg is capped at eps0."""
        r_avg = min(self.r_avg_cells * float(grid.spacing.min()), eps0)
        lam = self.lambda_ex if self.lambda_ex > 0 else k0 / r_avg ** 2
        return r_avg, lam

    def to_dict(self) -> Dict[str, Any]:
        return {"n_s": self.n_s, "r_avg_cells": self.r_avg_cells, "lambda_ex": self.lambda_ex}


def curve_transport(chart: TubeChart, m: MaterialParams, t: float, s: np.ndarray) -> np.ndarray:
    """grad F^-1 (v_C(t, Gamma) - d_t F) at (t, s, 0, 0), shape (n, 3)."""
    s = np.asarray(s, dtype=float)
    zero = np.zeros_like(s)
    inv = chart.inv_grad_F(t, s, zero, zero)
    rel = m.v_C(t, chart.eval_curve(t, s)) - chart.curve_velocity(t, s, zero, zero)
    return np.einsum("...ij,...j->...i", inv, rel)


def xi_closure(chart: TubeChart, m: MaterialParams, uc: CurveField, t: Optional[float] = None) -> XiPair:
    """
    xi_nu = [e2 . grad F^-1 (v_C - d_t F)] u_C / k_n and likewise xi_omega with e3,
    everything at (t, s, 0, 0).
    """
    t = uc.time if t is None else t
    s = uc.grid.nodes
    zero = np.zeros_like(s)
    w = curve_transport(chart, m, t, s)
    kn = m.k_n(s, zero, zero)
    return XiPair(nu=w[:, 1] * uc.values / kn, om=w[:, 2] * uc.values / kn, time=t)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasketFunction:
    """
    Test function phi(t, x) = (1 - t / horizon)^2 p(x), vanishing at the horizon.

    Attributes:
        name: Short name
        spatial: p(x)
        spatial_grad: grad p(x), shape (..., 3)
        horizon: Time h where phi vanishes
    """
    name: str
    spatial: Callable[[np.ndarray], np.ndarray]
    spatial_grad: Callable[[np.ndarray], np.ndarray]
    horizon: float

    def _time_factor(self, t: float) -> float:
        return (1.0 - t / self.horizon) ** 2

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self._time_factor(t) * self.spatial(x)

    def grad(self, t: float, x: np.ndarray) -> np.ndarray:
        return self._time_factor(t) * self.spatial_grad(x)


def function_basket(horizon: float, center: Sequence[float] = (0.5, 0.5, 0.5), width: float = 0.2) -> List[BasketFunction]:
    """Five smooth test functions: 1, x, cos(pi x) cos(pi y), y z and a Gaussian bump."""
    c = np.asarray(center, dtype=float)
    pi = np.pi

    def one(x):
        return np.ones(np.shape(x)[:-1])

    def one_grad(x):
        return np.zeros(np.shape(x))

    def lin(x):
        return np.asarray(x)[..., 0]

    def lin_grad(x):
        g = np.zeros(np.shape(x))
        g[..., 0] = 1.0
        return g

    def cosxy(x):
        return np.cos(pi * x[..., 0]) * np.cos(pi * x[..., 1])

    def cosxy_grad(x):
        return np.stack(
            [
                -pi * np.sin(pi * x[..., 0]) * np.cos(pi * x[..., 1]),
                -pi * np.cos(pi * x[..., 0]) * np.sin(pi * x[..., 1]),
                np.zeros(np.shape(x)[:-1]),
            ],
            axis=-1,
        )

    def yz(x):
        return x[..., 1] * x[..., 2]

    def yz_grad(x):
        return np.stack([np.zeros(np.shape(x)[:-1]), x[..., 2], x[..., 1]], axis=-1)

    def bump(x):
        return np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * width ** 2))

    def bump_grad(x):
        return -(x - c) / width ** 2 * bump(x)[..., None]

    return [
        BasketFunction("const", one, one_grad, horizon),
        BasketFunction("x", lin, lin_grad, horizon),
        BasketFunction("cos-xy", cosxy, cosxy_grad, horizon),
        BasketFunction("yz", yz, yz_grad, horizon),
        BasketFunction("bump", bump, bump_grad, horizon),
    ]


# ---------------------------------------------------------------------------
# Coupled solver
# ---------------------------------------------------------------------------

@dataclass
class LimitTrajectory:
    """
    Output of run_limit.

    Attributes:
        bulk: BulkField snapshots, first one at t = 0
        curve: CurveField snapshots at the same times
        xi: XiPair per snapshot
        records: Per-step DataFrame (time, bulk_mass, curve_mass, mass, exchange, iterations)
        eps0: Chart radius used in the line terms
        r_avg: Exchange averaging radius
        lambda_ex: Exchange coefficient
        runtime: Wall time in seconds
    """
    bulk: List[BulkField]
    curve: List[CurveField]
    xi: List[XiPair]
    records: pd.DataFrame
    eps0: float
    r_avg: float
    lambda_ex: float
    runtime: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([b.time for b in self.bulk])

    def curve_frame(self) -> pd.DataFrame:
        """Long table of (time, s, u_C, xi_nu, xi_omega)."""
        rows = []
        for uc, xi in zip(self.curve, self.xi):
            rows.append(pd.DataFrame({
                "time": uc.time,
                "s": uc.grid.nodes,
                "u_C": uc.values,
                "xi_nu": xi.nu,
                "xi_omega": xi.om,
            }))
        return pd.concat(rows, ignore_index=True)


class LimitSolver:
    """
    Backward-Euler stepper for the coupled bulk/curve limit.

    Usage:
        solver = LimitSolver(chart, m, grid, Grid1D(64), SolveConfig(dt=0.0025, t_end=0.05))
        trajectory = solver.run()
    """

    def __init__(
        self,
        chart: TubeChart,
        m: MaterialParams,
        grid: Grid3D,
        grid1: Grid1D,
        config: SolveConfig,
        limit: Optional[LimitConfig] = None,
        eps0: Optional[float] = None,
    ):
        """
        Initialize the solver.

        Raises:
            DomainError: If t_end exceeds the curve's final time
            ValueError: If eps0 exceeds the chart radius
        """
        if config.t_end > chart.t_final * (1 + 1e-12):
            raise DomainError(f"t_end={config.t_end} exceeds the curve's final time {chart.t_final}")
        self.eps0 = chart.eps0 if eps0 is None else float(eps0)
        if self.eps0 > chart.eps0 * (1 + 1e-12):
            raise ValueError(f"eps0={self.eps0} exceeds the chart radius {chart.eps0}")
        self.chart = chart
        self.m = m
        self.grid = grid
        self.grid1 = grid1
        self.config = config
        self.limit = limit or LimitConfig(n_s=grid1.n_s)
        self.r_avg, self.lambda_ex = self.limit.resolve(grid, m.k0, chart.eps0)
        self.line_area = math.pi * self.eps0 ** 2
        self._static_weights: Optional[sp.csc_matrix] = None

    def exchange_weights(self, t: float) -> sp.csc_matrix:
        if self.chart.curve.static:
            if self._static_weights is None:
                self._static_weights = line_delta_weights(self.chart, self.grid, self.grid1, 0.0, self.r_avg)
            return self._static_weights
        return line_delta_weights(self.chart, self.grid, self.grid1, t, self.r_avg)

    def initial_state(self) -> Tuple[BulkField, CurveField]:
        """u0 at cell centers and u0 o Gamma(0, .) at the curve nodes."""
        u = BulkField.sample(self.grid, self.m.u0, 0.0)
        uc = CurveField(self.grid1, self.m.u0(self.chart.eval_curve(0.0, self.grid1.nodes)), 0.0)
        return u, uc

    def curve_operator(self, t: float) -> sp.csr_matrix:
        """Finite-volume flux differences of g alpha u_C - (k_s / g) d_s u_C, zero at both ends."""
        g1 = self.grid1
        mid = g1.midpoints
        zero = np.zeros_like(mid)
        g_mid = self.chart.speed(t, mid)
        ks = self.m.k_s(mid, zero, zero)
        alpha = curve_transport(self.chart, self.m, t, mid)[:, 0]
        D = ks / (g_mid * g1.spacing)
        ap = g_mid * np.maximum(alpha, 0.0)
        am = g_mid * np.minimum(alpha, 0.0)
        j = np.arange(g1.n_s - 1)
        rows = np.concatenate([j, j, j + 1, j + 1])
        cols = np.concatenate([j, j + 1, j, j + 1])
        vals = np.concatenate([D + ap, -D + am, -D - ap, D - am])
        return sp.coo_matrix((vals, (rows, cols)), shape=(g1.n_s, g1.n_s)).tocsr()

    def curve_mass(self, uc: CurveField) -> float:
        """pi eps0^2 sum ell g u_C."""
        g = self.chart.speed(uc.time, self.grid1.nodes)
        return self.line_area * float(np.sum(self.grid1.control_lengths * g * uc.values))

    def assemble(self, u: BulkField, uc: CurveField, t_new: float) -> Tuple[LinearSystem, Dict[str, Any]]:
        """Monolithic system for the bulk cells followed by the curve nodes."""
        dt = t_new - u.time
        grid, g1 = self.grid, self.grid1
        centers = grid.cell_centers()
        n = grid.n_cells
        coeff = CellCoefficients(
            a=np.ones(n),
            K=np.broadcast_to(self.m.k0 * np.eye(3), (n, 3, 3)),
            v=self.m.v(t_new, centers),
            time=t_new,
        )
        bulk = assemble_system(grid, coeff, coeff, u.values, dt)

        W = self.exchange_weights(t_new)
        ell = g1.control_lengths
        g_old = self.chart.speed(uc.time, g1.nodes)
        g_new = self.chart.speed(t_new, g1.nodes)
        A = self.line_area
        lam = self.lambda_ex
        Dg = sp.diags(ell * g_new)

        A11 = bulk.matrix + A * lam * (W @ Dg @ W.T)
        A12 = -A * lam * (W @ Dg)
        A21 = -A * lam * (Dg @ W.T)
        A22 = A * (sp.diags(ell * g_new / dt) + self.curve_operator(t_new) + lam * Dg)
        matrix = sp.bmat([[A11, A12], [A21, A22]], format="csr")
        rhs = np.concatenate([bulk.rhs, A * ell * g_old * uc.values / dt])
        x0 = np.concatenate([u.values, uc.values])
        return LinearSystem(matrix=matrix, rhs=rhs, x0=x0), {"W": W, "g": g_new}

    def step(self, u: BulkField, uc: CurveField, t_new: float) -> Tuple[BulkField, CurveField, SolveStats, float]:
        system, parts = self.assemble(u, uc, t_new)
        x, stats = linear_solve(system, self.config.tolerance, self.config.max_iterations)
        n = self.grid.n_cells
        u_new = BulkField(self.grid, x[:n], t_new)
        uc_new = CurveField(self.grid1, x[n:], t_new)
        q = self.lambda_ex * (parts["W"].T @ u_new.values - uc_new.values)
        exchange = self.line_area * float(np.sum(self.grid1.control_lengths * parts["g"] * q))
        return u_new, uc_new, stats, exchange

    def _record(self, u: BulkField, uc: CurveField, iterations: int, exchange: float) -> Dict[str, Any]:
        bulk_mass = self.grid.integrate(u.values)
        curve_mass = self.curve_mass(uc)
        return {
            "time": u.time,
            "bulk_mass": bulk_mass,
            "curve_mass": curve_mass,
            "mass": bulk_mass + curve_mass,
            "exchange": exchange,
            "iterations": iterations,
        }

    def run(self, initial: Optional[Tuple[BulkField, CurveField]] = None) -> LimitTrajectory:
        start = _time.perf_counter()
        times = self.config.time_grid()
        u, uc = initial if initial is not None else self.initial_state()
        logger.info(
            f"Starting limit run: curve={self.chart.curve.name}, grid={self.grid.shape}, n_s={self.grid1.n_s}, "
            f"r_avg={self.r_avg:.4g}, lambda_ex={self.lambda_ex:.4g}, steps={len(times) - 1}"
        )
        bulk, curve, xi = [u], [uc], [xi_closure(self.chart, self.m, uc)]
        records = [self._record(u, uc, 0, 0.0)]
        for k, t_new in enumerate(times[1:], start=1):
            u, uc, stats, exchange = self.step(u, uc, float(t_new))
            records.append(self._record(u, uc, stats.iterations, exchange))
            if k % self.config.snapshot_every == 0 or k == len(times) - 1:
                bulk.append(u)
                curve.append(uc)
                xi.append(xi_closure(self.chart, self.m, uc))
            logger.debug(f"step {k}: t={t_new:.5g}, iterations={stats.iterations}, mass={records[-1]['mass']:.12g}")

        frame = pd.DataFrame(records)
        mass0 = frame["mass"].iloc[0]
        drift = abs(frame["mass"].iloc[-1] - mass0) / max(abs(mass0), 1e-300)
        runtime = _time.perf_counter() - start
        logger.info(f"Limit run complete: {len(times) - 1} steps, relative mass drift {drift:.2e}, {runtime:.1f}s")
        return LimitTrajectory(
            bulk=bulk,
            curve=curve,
            xi=xi,
            records=frame,
            eps0=self.eps0,
            r_avg=self.r_avg,
            lambda_ex=self.lambda_ex,
            runtime=runtime,
        )


def run_limit(
    config: SolveConfig,
    chart: TubeChart,
    eps0: float,
    m: MaterialParams,
    grid3: Grid3D,
    grid1: Grid1D,
    limit: Optional[LimitConfig] = None,
) -> LimitTrajectory:
    """Run the coupled limit solver from u0 and u0 o Gamma(0, .)."""
    return LimitSolver(chart, m, grid3, grid1, config, limit, eps0).run()


# ---------------------------------------------------------------------------
# Weak residual
# ---------------------------------------------------------------------------

def weak_residual(
    chart: TubeChart,
    m: MaterialParams,
    eps0: float,
    bulk: Sequence[BulkField],
    curve: Sequence[CurveField],
    phi: BasketFunction,
    grid: Optional[Grid3D] = None,
    grid1: Optional[Grid1D] = None,
) -> float:
    """
    Residual of a bulk/curve pair in the limit weak identity.

    Volume block (midpoint rule over cells):
        - int phi(0) u0 - int int (phi_t u - k0 grad phi . grad u + u grad phi . v)
    Line block (trapezoid over the curve nodes, times pi eps0^2):
        - int phi~(0) u0(Gamma) g - int int g [phi~_t u_C + grad_snw phi~ . w u_C
          - d_s phi~ (k_s / g^2) d_s u_C - k_n (d_nu phi~ xi_nu + d_om phi~ xi_om)]
    with phi~ = phi o F at (s, 0, 0), grad_snw phi~ = grad F^T grad phi and
    w = grad F^-1 (v_C - d_t F). Time derivatives are differenced between
    consecutive fields and the remaining terms taken at the later time, the
    quadrature that matches backward Euler. phi must vanish at the last time.

    Returns:
        Scalar residual; zero for an exact discrete solution
    """
    if len(bulk) != len(curve) or len(bulk) < 2:
        raise ValueError("weak_residual needs matching bulk and curve sequences of length >= 2")
    times = np.array([b.time for b in bulk])
    if not np.allclose(times, [c.time for c in curve], rtol=0, atol=1e-12):
        raise ValueError("Bulk and curve fields are not on the same time levels")
    grid = grid or bulk[0].grid
    grid1 = grid1 or curve[0].grid
    V = grid.cell_volume
    centers = grid.cell_centers()
    s = grid1.nodes
    zero = np.zeros_like(s)
    ell = grid1.control_lengths
    mid = grid1.midpoints
    zero_mid = np.zeros_like(mid)
    ks_mid = m.k_s(mid, zero_mid, zero_mid)
    kn = m.k_n(s, zero, zero)

    phi_x = [phi(float(t), centers) for t in times]
    gammas = [chart.eval_curve(float(t), s) for t in times]
    phi_line = [phi(float(t), gam) for t, gam in zip(times, gammas)]

    volume = -V * float(np.sum(phi_x[0] * bulk[0].values))
    g0 = chart.speed(float(times[0]), s)
    line = -float(np.sum(ell * g0 * phi_line[0] * curve[0].values))

    for n in range(len(times) - 1):
        t1 = float(times[n + 1])
        dt = t1 - float(times[n])
        u = bulk[n + 1].values
        uc = curve[n + 1]

        volume -= V * float(np.sum((phi_x[n + 1] - phi_x[n]) * bulk[n].values))
        g_prev = chart.speed(float(times[n]), s)
        line -= float(np.sum(ell * g_prev * (phi_line[n + 1] - phi_line[n]) * curve[n].values))

        grad_phi = phi.grad(t1, centers)
        grad_u = grid.gradient(u)
        vel = m.v(t1, centers)
        volume -= dt * V * float(np.sum(
            -m.k0 * np.sum(grad_phi * grad_u, axis=-1) + u * np.sum(grad_phi * vel, axis=-1)
        ))

        g1 = chart.speed(t1, s)
        dphi = np.einsum("...ji,...j->...i", chart.grad_F(t1, s, zero, zero), phi.grad(t1, gammas[n + 1]))
        w = curve_transport(chart, m, t1, s)
        xi = xi_closure(chart, m, uc, t1)
        transport = float(np.sum(ell * g1 * uc.values * np.sum(dphi * w, axis=-1)))
        transverse = float(np.sum(ell * g1 * kn * (dphi[:, 1] * xi.nu + dphi[:, 2] * xi.om)))
        g_mid = chart.speed(t1, mid)
        diffusion = float(np.sum(
            grid1.spacing * (np.diff(phi_line[n + 1]) / grid1.spacing) * (ks_mid / g_mid) * (np.diff(uc.values) / grid1.spacing)
        ))
        line -= dt * (transport - diffusion - transverse)

    return volume + math.pi * eps0 ** 2 * line
