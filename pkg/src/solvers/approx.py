"""
Approximating Solver Module

Conservative implicit solver for the approximating family

    d_t(a u) - div(K grad u) + div(u v) = 0,   zero total flux on the boundary

on a uniform cell-centered grid.

Features:
- Backward Euler that differences a^(n+1) u^(n+1) - a^n u^n directly
- Harmonic-mean face diffusivity, first-order upwind advection
- Cell coefficients from tube-coordinate quadrature deposited into cells
- Zero column sums of the flux part, so sum V a u is conserved to solver tolerance
- Per-step mass and energy records in a DataFrame
- Manufactured-solution errors for the space and time order of the scheme
"""

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from ..coefficients.fields import advection_bound, curve_tensor, dt_capacity_a, zeta_coords
from ..coefficients.params import CapacityParams, DeltaRule, MaterialParams
from ..exceptions import AssemblyError, DomainError
from ..geometry.chart import TubeChart
from ..mesh.grids import Grid3D
from ..mesh.quadrature import QuadratureDensity, Region, tube_nodes
from .linear import LinearSystem, SolveStats, linear_solve

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class BulkField:
    """
    Cell-centered concentration on a Grid3D.

    Attributes:
        grid: Grid the values live on
        values: One value per cell, flattening order of the grid
        time: Time stamp
    """
    grid: Grid3D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ValueError(f"BulkField needs {self.grid.n_cells} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"BulkField at t={self.time} has non-finite values")

    @classmethod
    def sample(cls, grid: Grid3D, f: Callable[[np.ndarray], np.ndarray], time: float = 0.0) -> "BulkField":
        """Sample f at cell centers."""
        return cls(grid, np.asarray(f(grid.cell_centers()), dtype=float), time)


@dataclass
class SolveConfig:
    """
    Time stepping and linear-solver settings shared by both solvers.

    Attributes:
        dt: Backward-Euler step
        t_end: Final time (must not exceed the curve's T)
        tolerance: Relative residual tolerance, in (0, 1e-4]
        max_iterations: BiCGStab iteration cap per step
        delta_rule: Coupling of delta to eps along ladders
        snapshot_every: Keep every n-th step in the trajectory
        write_vtk: Whether front ends should write VTK snapshots
    """
    dt: float = 0.0025
    t_end: float = 0.05
    tolerance: float = 1e-12
    max_iterations: int = 2000
    delta_rule: DeltaRule = DeltaRule.EPS3
    snapshot_every: int = 1
    write_vtk: bool = False

    def __post_init__(self):
        if isinstance(self.delta_rule, str):
            self.delta_rule = DeltaRule(self.delta_rule)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.tolerance <= 1e-4:
            raise ValueError(f"tolerance must lie in (0, 1e-4], got {self.tolerance}")
        if self.max_iterations < 1 or self.snapshot_every < 1:
            raise ValueError("max_iterations and snapshot_every must be positive")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "SolveConfig":
        return cls(**{k: v for k, v in config.items() if k in cls.__dataclass_fields__})

    def time_grid(self) -> np.ndarray:
        """Step times 0 = t_0 < ... < t_N = t_end with N = round(t_end / dt)."""
        n_steps = max(1, int(round(self.t_end / self.dt)))
        if not math.isclose(n_steps * self.dt, self.t_end, rel_tol=1e-9):
            logger.warning(f"t_end={self.t_end} is not a multiple of dt={self.dt}; using {n_steps} equal steps")
        return np.linspace(0.0, self.t_end, n_steps + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dt": self.dt,
            "t_end": self.t_end,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "delta_rule": self.delta_rule.value,
            "snapshot_every": self.snapshot_every,
            "write_vtk": self.write_vtk,
        }


@dataclass
class CellCoefficients:
    """
    Cell averages of the coefficients at one time.

    Attributes:
        a: Capacity, shape (n,)
        K: Diffusivity tensors, shape (n, 3, 3)
        v: Velocities, shape (n, 3)
        time: Time stamp
    """
    a: np.ndarray
    K: np.ndarray
    v: np.ndarray
    time: float = 0.0

    @classmethod
    def uniform(cls, grid: Grid3D, a: float = 1.0, k: float = 1.0, v=(0.0, 0.0, 0.0), time: float = 0.0) -> "CellCoefficients":
        n = grid.n_cells
        return cls(
            a=np.full(n, float(a)),
            K=np.broadcast_to(k * np.eye(3), (n, 3, 3)).copy(),
            v=np.broadcast_to(np.asarray(v, dtype=float), (n, 3)).copy(),
            time=time,
        )


@dataclass
class TubeDeposit:
    """
    Tube quadrature nodes located in grid cells.

    Attributes:
        cells: Cell index of every node inside Omega
        points: Ambient node positions, shape (m, 3)
        zeta_jw: zeta * J_F * weight per node
        tensor: Curve tensor Kc per node, shape (m, 3, 3)
    """
    cells: np.ndarray
    points: np.ndarray
    zeta_jw: np.ndarray
    tensor: np.ndarray

    def cell_sums(self, values: np.ndarray, n_cells: int) -> np.ndarray:
        """Per-cell sums of zeta J_F w * values (any trailing shape)."""
        trailing = np.shape(values)[1:]
        weighted = self.zeta_jw.reshape((-1,) + (1,) * len(trailing)) * values
        flat = weighted.reshape(len(self.cells), int(np.prod(trailing)))
        out = np.stack(
            [np.bincount(self.cells, weights=flat[:, k], minlength=n_cells) for k in range(flat.shape[1])],
            axis=-1,
        )
        return out.reshape((n_cells,) + np.shape(values)[1:])


def build_tube_deposit(
    chart: TubeChart,
    p: CapacityParams,
    m: MaterialParams,
    grid: Grid3D,
    t: float,
    density: Optional[QuadratureDensity] = None,
    nodes_per_cell: int = 3,
) -> TubeDeposit:
    """Locate support-of-zeta quadrature nodes, resolving the grid spacing."""
    length = float(chart.speed(t, np.linspace(0.0, 1.0, 33)).max())
    density = (density or QuadratureDensity()).resolving(
        float(grid.spacing.min()), p.eps + p.delta, length, nodes_per_cell
    )
    nodes = tube_nodes(Region.SUPPORT, chart.eps0, p, density)
    points = chart.point(t, nodes.s, nodes.nu, nodes.om)
    J = chart.det_J_F(t, nodes.s, nodes.nu, nodes.om)
    cells = grid.locate(points)
    ok = cells >= 0
    zjw = zeta_coords(p, nodes.s, nodes.nu, nodes.om) * J * nodes.weight
    keep = ok & (zjw != 0.0)
    tensor = curve_tensor(chart, m, t, nodes.s[keep], nodes.nu[keep], nodes.om[keep])
    return TubeDeposit(cells=cells[keep], points=points[keep], zeta_jw=zjw[keep], tensor=tensor)


def cell_coefficients(
    deposit: TubeDeposit,
    p: CapacityParams,
    m: MaterialParams,
    grid: Grid3D,
    t: float,
) -> CellCoefficients:
    """
    Cell averages of a, K and v from a tube deposit.

    a = 1 + (r - 1) Z / |cell|, K = k0 I + (1/|cell|) int zeta (r Kc - k0 I),
    v = v(center) + (1/|cell|) int zeta (r v_C - v), r = eps0^2 / eps^2.
    """
    V = grid.cell_volume
    r = p.contrast
    n = grid.n_cells
    Z = deposit.cell_sums(np.ones(len(deposit.cells)), n)
    # node deposition can overshoot a cell by a fraction of one node volume
    scale = np.where(Z > V, V / np.where(Z > 0, Z, 1.0), 1.0)
    frac = Z * scale / V

    a = 1.0 + (r - 1.0) * frac
    eye = np.eye(3)
    K = m.k0 * eye + deposit.cell_sums(r * deposit.tensor - m.k0 * eye, n) * (scale / V)[:, None, None]
    if len(deposit.points):
        dv = r * m.v_C(t, deposit.points) - m.v(t, deposit.points)
    else:
        dv = np.zeros((0, 3))
    v = m.v(t, grid.cell_centers()) + deposit.cell_sums(dv, n) * (scale / V)[:, None]
    return CellCoefficients(a=a, K=K, v=v, time=t)


def compute_cell_coefficients(
    chart: TubeChart,
    p: CapacityParams,
    m: MaterialParams,
    grid: Grid3D,
    t: float,
    density: Optional[QuadratureDensity] = None,
    nodes_per_cell: int = 3,
) -> CellCoefficients:
    """Cell-averaged a, K and v at time t."""
    deposit = build_tube_deposit(chart, p, m, grid, t, density, nodes_per_cell)
    return cell_coefficients(deposit, p, m, grid, t)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def face_pairs(grid: Grid3D, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """(lower, upper) flat cell indices of every interior face normal to axis."""
    idx = np.arange(grid.n_cells).reshape(grid.shape)
    n = grid.shape[axis]
    lower = np.take(idx, np.arange(n - 1), axis=axis).ravel()
    upper = np.take(idx, np.arange(1, n), axis=axis).ravel()
    return lower, upper


def flux_matrix(grid: Grid3D, K: np.ndarray, v: np.ndarray) -> sp.csr_matrix:
    """
    Face-flux divergence of -K grad u + u v with zero flux on the boundary.

    Two-point diffusive flux with the harmonic mean of the normal
    diffusivities, upwind advective flux on the face-averaged normal velocity.
    Every column sums to zero.
    """
    rows, cols, vals = [], [], []
    V = grid.cell_volume
    for k in range(3):
        if grid.shape[k] < 2:
            continue
        i, j = face_pairs(grid, k)
        h = grid.spacing[k]
        area = V / h
        ki, kj = K[i, k, k], K[j, k, k]
        T = area / h * 2.0 * ki * kj / (ki + kj)
        vf = 0.5 * (v[i, k] + v[j, k])
        vp = area * np.maximum(vf, 0.0)
        vm = area * np.minimum(vf, 0.0)
        # outflow F = T (u_i - u_j) + vp u_i + vm u_j leaves i and enters j
        rows += [i, i, j, j]
        cols += [i, j, i, j]
        vals += [T + vp, -T + vm, -T - vp, T - vm]
    if not rows:
        return sp.csr_matrix((grid.n_cells, grid.n_cells))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_cells, grid.n_cells),
    ).tocsr()


def assemble_system(
    grid: Grid3D,
    coeff_old: CellCoefficients,
    coeff_new: CellCoefficients,
    u_old: np.ndarray,
    dt: float,
    source: Optional[np.ndarray] = None,
) -> LinearSystem:
    """
    Backward-Euler finite-volume system.

    V a^(n+1) u / dt + flux(u) = V a^n u_old / dt (+ V source)

    Raises:
        AssemblyError: On dt <= 0 or non-finite coefficients
    """
    if not dt > 0:
        raise AssemblyError(f"Time step must be positive, got {dt}")
    for name, arr in (("a", coeff_new.a), ("K", coeff_new.K), ("v", coeff_new.v), ("a_old", coeff_old.a), ("u_old", u_old)):
        if not np.all(np.isfinite(arr)):
            raise AssemblyError(f"Non-finite {name} in assembly at t={coeff_new.time}")
    V = grid.cell_volume
    matrix = sp.diags(V * coeff_new.a / dt) + flux_matrix(grid, coeff_new.K, coeff_new.v)
    rhs = V * coeff_old.a * u_old / dt
    if source is not None:
        rhs = rhs + V * np.asarray(source, dtype=float)
    return LinearSystem(matrix=matrix.tocsr(), rhs=rhs, x0=np.array(u_old, dtype=float))


def assemble_step(
    grid: Grid3D,
    chart: TubeChart,
    p: CapacityParams,
    m: MaterialParams,
    u_old: BulkField,
    t: float,
    dt: float,
    density: Optional[QuadratureDensity] = None,
    coefficients: Optional[Tuple[CellCoefficients, CellCoefficients]] = None,
) -> LinearSystem:
    """
    System for one step from t to t + dt.

    Args:
        coefficients: Precomputed (old, new) cell coefficients; computed by
            tube quadrature when omitted
    """
    if coefficients is None:
        coefficients = (
            compute_cell_coefficients(chart, p, m, grid, t, density),
            compute_cell_coefficients(chart, p, m, grid, t + dt, density),
        )
    old, new = coefficients
    return assemble_system(grid, old, new, u_old.values, dt)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

@dataclass
class ApproxTrajectory:
    """
    Output of run_approx.

    Attributes:
        snapshots: Kept BulkFields, first one at t = 0
        capacities: Cell capacities a matching the snapshots
        records: Per-step DataFrame (time, mass, energy, gradient, iterations, ...)
        params: Capacity parameters of the run
        advection_bound: sup-norm of <v, v_C> over cell centers and steps
        runtime: Wall time in seconds
    """
    snapshots: List[BulkField]
    capacities: List[np.ndarray]
    records: pd.DataFrame
    params: CapacityParams
    advection_bound: float = 0.0
    runtime: float = 0.0

    @property
    def final(self) -> BulkField:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


@dataclass
class EnergyReport:
    """
    Energy quantities of a trajectory.

    Attributes:
        max_energy: max over steps of int a u^2
        gradient_integral: accumulated int int a |grad u|^2
        initial_energy: int a(0) u0^2
        dt_capacity_term: accumulated int int (1/2) d_t a u^2 (0 for static curves)
        advection_bound: sup-norm of <v, v_C>
        growth_suspect: Energy grew beyond the growth factor
    """
    max_energy: float
    gradient_integral: float
    initial_energy: float
    dt_capacity_term: float = 0.0
    advection_bound: float = 0.0
    growth_suspect: bool = False

    def normalized(self) -> Tuple[float, float]:
        """Both energy quantities divided by int a u0^2 (zeros for zero data)."""
        if self.initial_energy <= 0:
            return 0.0, 0.0
        return self.max_energy / self.initial_energy, self.gradient_integral / self.initial_energy

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_energy": self.max_energy,
            "gradient_integral": self.gradient_integral,
            "initial_energy": self.initial_energy,
            "dt_capacity_term": self.dt_capacity_term,
            "advection_bound": self.advection_bound,
            "growth_suspect": self.growth_suspect,
        }


class ApproxSolver:
    """
    Time stepper for the approximating family.

    Usage:
        solver = ApproxSolver(chart, p, m, grid, SolveConfig(dt=0.0025, t_end=0.05))
        trajectory = solver.run()
        print(trajectory.records.tail())
    """

    def __init__(
        self,
        chart: TubeChart,
        p: CapacityParams,
        m: MaterialParams,
        grid: Grid3D,
        config: SolveConfig,
        density: Optional[QuadratureDensity] = None,
        nodes_per_cell: int = 3,
        track_dt_capacity: bool = True,
    ):
        """
        Initialize the solver.

        Raises:
            DomainError: If t_end exceeds the curve's final time
        """
        if config.t_end > chart.t_final * (1 + 1e-12):
            raise DomainError(f"t_end={config.t_end} exceeds the curve's final time {chart.t_final}")
        self.chart = chart
        self.p = p
        self.m = m
        self.grid = grid
        self.config = config
        self.density = density or QuadratureDensity()
        self.nodes_per_cell = nodes_per_cell
        self.track_dt_capacity = track_dt_capacity and not chart.curve.static
        self._static_deposit: Optional[TubeDeposit] = None

    def coefficients(self, t: float) -> CellCoefficients:
        """Cell coefficients at t; the tube deposit is reused for static curves."""
        if self.chart.curve.static:
            if self._static_deposit is None:
                self._static_deposit = build_tube_deposit(
                    self.chart, self.p, self.m, self.grid, 0.0, self.density, self.nodes_per_cell
                )
            deposit = self._static_deposit
        else:
            deposit = build_tube_deposit(self.chart, self.p, self.m, self.grid, t, self.density, self.nodes_per_cell)
        return cell_coefficients(deposit, self.p, self.m, self.grid, t)

    def initial_field(self) -> BulkField:
        return BulkField.sample(self.grid, self.m.u0, 0.0)

    def step(
        self,
        u: BulkField,
        coeff_old: CellCoefficients,
        coeff_new: CellCoefficients,
    ) -> Tuple[BulkField, SolveStats]:
        dt = coeff_new.time - coeff_old.time
        system = assemble_system(self.grid, coeff_old, coeff_new, u.values, dt)
        values, stats = linear_solve(system, self.config.tolerance, self.config.max_iterations)
        return BulkField(self.grid, values, coeff_new.time), stats

    def _record(self, u: BulkField, coeff: CellCoefficients, iterations: int, residual: float) -> Dict[str, Any]:
        grid = self.grid
        grad = grid.gradient(u.values)
        record = {
            "time": u.time,
            "mass": grid.integrate(coeff.a * u.values),
            "energy": grid.integrate(coeff.a * u.values ** 2),
            "gradient": grid.integrate(coeff.a * np.sum(grad ** 2, axis=-1)),
            "min_u": float(u.values.min()),
            "max_u": float(u.values.max()),
            "iterations": iterations,
            "residual": residual,
        }
        if self.track_dt_capacity:
            dta = dt_capacity_a(self.chart, self.p, u.time, grid.cell_centers())
            record["dt_capacity"] = grid.integrate(0.5 * dta * u.values ** 2)
        return record

    def run(self, u0: Optional[BulkField] = None) -> ApproxTrajectory:
        """
        Time-step from u0 (sampled from m.u0 when omitted) to t_end.

        Returns:
            ApproxTrajectory with snapshots and per-step records
        """
        start = _time.perf_counter()
        times = self.config.time_grid()
        u = u0 if u0 is not None else self.initial_field()
        coeff = self.coefficients(float(times[0]))
        centers = self.grid.cell_centers()
        bound = advection_bound(self.m, float(times[0]), centers)

        logger.info(
            f"Starting approximating run: curve={self.chart.curve.name}, eps={self.p.eps:.4g}, "
            f"delta={self.p.delta:.3g}, grid={self.grid.shape}, steps={len(times) - 1}"
        )

        snapshots, capacities = [u], [coeff.a]
        records = [self._record(u, coeff, 0, 0.0)]
        mass0 = records[0]["mass"]
        for n, t_new in enumerate(times[1:], start=1):
            coeff_new = self.coefficients(float(t_new))
            u, stats = self.step(u, coeff, coeff_new)
            coeff = coeff_new
            records.append(self._record(u, coeff, stats.iterations, stats.residual))
            bound = max(bound, advection_bound(self.m, float(t_new), centers))
            if n % self.config.snapshot_every == 0 or n == len(times) - 1:
                snapshots.append(u)
                capacities.append(coeff.a)
            logger.debug(f"step {n}: t={t_new:.5g}, iterations={stats.iterations}, mass={records[-1]['mass']:.12g}")

        frame = pd.DataFrame(records)
        drift = abs(frame["mass"].iloc[-1] - mass0) / max(abs(mass0), 1e-300)
        runtime = _time.perf_counter() - start
        logger.info(f"Approximating run complete: {len(times) - 1} steps, relative mass drift {drift:.2e}, {runtime:.1f}s")
        return ApproxTrajectory(
            snapshots=snapshots,
            capacities=capacities,
            records=frame,
            params=self.p,
            advection_bound=bound,
            runtime=runtime,
        )


def run_approx(
    config: SolveConfig,
    p: CapacityParams,
    m: MaterialParams,
    chart: TubeChart,
    grid: Grid3D,
    density: Optional[QuadratureDensity] = None,
    nodes_per_cell: int = 3,
) -> ApproxTrajectory:
    """Run the approximating solver with u0 sampled at cell centers."""
    return ApproxSolver(chart, p, m, grid, config, density, nodes_per_cell).run()


def energy_report(
    trajectory: ApproxTrajectory,
    chart: Optional[TubeChart] = None,
    p: Optional[CapacityParams] = None,
    growth_factor: float = 10.0,
) -> EnergyReport:
    """
    Energy pair of a trajectory from its per-step records.

    The gradient integral accumulates dt * int a |grad u|^2 at the new time
    level of every step, matching backward Euler.
    """
    rec = trajectory.records
    dt = np.diff(rec["time"].to_numpy())
    initial = float(rec["energy"].iloc[0])
    max_energy = float(rec["energy"].max())
    gradient = float(np.sum(dt * rec["gradient"].to_numpy()[1:]))
    dt_term = float(np.sum(dt * rec["dt_capacity"].to_numpy()[1:])) if "dt_capacity" in rec else 0.0
    suspect = initial > 0 and max_energy > growth_factor * initial
    if suspect:
        name = chart.curve.name if chart is not None else "?"
        eps = p.eps if p is not None else trajectory.params.eps
        logger.warning(
            f"Energy grew from {initial:.4g} to {max_energy:.4g} (curve {name}, eps={eps:.4g}); "
            "t_end may exceed the existence time of the limit"
        )
    return EnergyReport(
        max_energy=max_energy,
        gradient_integral=gradient,
        initial_energy=initial,
        dt_capacity_term=dt_term,
        advection_bound=trajectory.advection_bound,
        growth_suspect=bool(suspect),
    )


def observed_order(errors: List[float], ratio: float = 2.0) -> List[float]:
    """Observed convergence orders log(e_i / e_(i+1)) / log(ratio) of a refinement sequence."""
    e = np.asarray(errors, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / np.log(ratio))


# ---------------------------------------------------------------------------
# Manufactured solutions
# ---------------------------------------------------------------------------

def manufactured_space_error(n: int, k: float = 1.0, dt: float = 10.0, tolerance: float = 1e-12) -> float:
    """
    Max cell error of one large step against u* = cos(pi x) on an n x 1 x 1 grid.

    u* has zero normal flux on the walls and solves -k u'' = f with
    f = k pi^2 cos(pi x). Starting from u*, one step of
    V u / dt + flux(u) = V u* / dt + V f leaves only the spatial
    consistency error, so the error is O(h^2).
    """
    grid = Grid3D(((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), (n, 1, 1))
    x = grid.cell_centers()[:, 0]
    exact = np.cos(np.pi * x)
    coeff_old = CellCoefficients.uniform(grid, k=k, time=0.0)
    coeff_new = CellCoefficients.uniform(grid, k=k, time=dt)
    source = k * np.pi ** 2 * exact
    system = assemble_system(grid, coeff_old, coeff_new, exact, dt, source=source)
    values, _ = linear_solve(system, tolerance)
    return float(np.abs(values - exact).max())


def manufactured_time_error(dt: float, t_end: float = 1.0, rate: float = 0.5, tolerance: float = 1e-12) -> float:
    """
    Error at t_end of backward Euler on one cell with capacity a(t) = 1 + rate t.

    The manufactured solution u*(t) = exp(-t) gives the source
    d_t(a u*) = (rate - 1 - rate t) exp(-t), taken at the new time level; the
    error is O(dt).
    """
    grid = Grid3D(((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), (1, 1, 1))
    n_steps = max(1, int(round(t_end / dt)))
    times = np.linspace(0.0, t_end, n_steps + 1)
    u = np.ones(1)
    for t_old, t_new in zip(times[:-1], times[1:]):
        coeff_old = CellCoefficients.uniform(grid, a=1.0 + rate * t_old, time=t_old)
        coeff_new = CellCoefficients.uniform(grid, a=1.0 + rate * t_new, time=t_new)
        source = np.array([(rate - 1.0 - rate * t_new) * math.exp(-t_new)])
        system = assemble_system(grid, coeff_old, coeff_new, u, t_new - t_old, source=source)
        u, _ = linear_solve(system, tolerance)
    return float(abs(u[0] - math.exp(-t_end)))
