"""
Epsilon Ladders

Sequences of runs along eps_i = eps0 / 2^i with delta tied to eps by a
delta-rule, judged by trend criteria:

- Capacity ladder: pairing of a_(eps, delta) with f against its limit target
- Energy ladder: normalized energy pair of the approximating solver
- Limit comparison: disk averages of approximating runs against the limit solver
- Residual refinement: weak residual of limit runs under grid refinement

Rungs are independent and run on a thread pool sized by CCFLOW_THREADS.
"""

import logging
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from config.run_config import RunConfig
from ..coefficients.params import CapacityParams, DeltaRule
from ..exceptions import CCFlowError
from ..geometry.chart import TubeChart
from ..mesh.grids import Grid1D, Grid3D
from ..mesh.quadrature import QuadratureDensity, capacity_limit_target, capacity_pairing, disk_average
from ..solvers.approx import ApproxSolver, energy_report
from ..solvers.limit import CurveField, function_basket, run_limit, weak_residual
from .report import ConvergenceReport, Criterion
from .scenario import (
    build_chart,
    build_density,
    build_grid,
    build_grid1,
    build_limit_config,
    build_material,
    build_solve_config,
    thread_count,
)

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class Ladder:
    """
    Layout of an eps-ladder.

    Attributes:
        eps0: Chart radius
        n_rungs: Number of rungs
        first_rung: Index i of the first rung
        rule: delta-rule
        delta_constant: Constant C in delta = C eps^k
        delta: Fixed delta for the explicit rule
        base_resolution: Grid resolution of the first rung
        max_resolution: Resolution cap
    """
    eps0: float
    n_rungs: int = 3
    first_rung: int = 1
    rule: DeltaRule = DeltaRule.EPS3
    delta_constant: float = 1.0
    delta: Optional[float] = None
    base_resolution: int = 24
    max_resolution: int = 96

    def __post_init__(self):
        if isinstance(self.rule, str):
            self.rule = DeltaRule(self.rule)
        if self.n_rungs < 1 or self.first_rung < 1:
            raise ValueError("A ladder needs n_rungs >= 1 and first_rung >= 1")

    @classmethod
    def from_config(
        cls,
        config: RunConfig,
        deep: bool = False,
        rule: Optional[DeltaRule] = None,
        n_rungs: Optional[int] = None,
    ) -> "Ladder":
        lad = config.ladder
        return cls(
            eps0=float(config.geometry["eps0"]),
            n_rungs=n_rungs or int(lad["deep_rungs"] if deep else lad["n_rungs"]),
            first_rung=int(lad["first_rung"]),
            rule=rule or DeltaRule(config.solver["delta_rule"]),
            delta_constant=float(config.capacity["delta_constant"]),
            delta=float(config.capacity["delta"]),
            base_resolution=int(lad["base_resolution"]),
            max_resolution=int(lad["deep_max_resolution"] if deep else lad["max_resolution"]),
        )

    @property
    def indices(self) -> List[int]:
        return list(range(self.first_rung, self.first_rung + self.n_rungs))

    def eps_values(self) -> List[float]:
        return [self.eps0 / 2 ** i for i in self.indices]

    def params(self) -> List[CapacityParams]:
        return [CapacityParams.from_rule(self.eps0, eps, self.rule, self.delta_constant, self.delta) for eps in self.eps_values()]

    def resolution(self, k: int) -> int:
        """Grid resolution of the k-th rung (0-based): base * 2^k, capped."""
        return min(self.base_resolution * 2 ** k, self.max_resolution)


def _map_rungs(fn: Callable[[int], Dict[str, Any]], n: int) -> List[Dict[str, Any]]:
    workers = min(thread_count(), n)
    if workers <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def strictly_decreasing(values: Sequence[float]) -> bool:
    """True for a strictly decreasing sequence; an all-zero sequence also passes."""
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return True
    return bool(np.all(np.diff(v) < 0))


def _ratio_detail(values: Sequence[float]) -> str:
    return "values " + ", ".join(f"{x:.4g}" for x in values)


# ---------------------------------------------------------------------------
# Capacity ladder
# ---------------------------------------------------------------------------

def run_capacity_ladder(
    chart: TubeChart,
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    ladder: Ladder,
    grid: Grid3D,
    f_name: str = "f",
    mode: str = "tube",
    density: Optional[QuadratureDensity] = None,
    threshold: float = 1e-3,
) -> ConvergenceReport:
    """
    Pairing of a_(eps, delta) with f along the ladder against
    int f + pi eps0^2 int (f o Gamma) |d_s Gamma|.

    Hard criteria: the error decreases strictly along the ladder and the
    final relative error is below threshold. A zero target switches to
    absolute errors.
    """
    start = _time.perf_counter()
    target = capacity_limit_target(chart, f, t, grid)
    scale = abs(target) if target != 0 else 1.0
    params = ladder.params()

    def rung(k: int) -> Dict[str, Any]:
        p = params[k]
        tic = _time.perf_counter()
        value = capacity_pairing(chart, p, f, t, grid, mode=mode, density=density)
        error = abs(value - target)
        return {
            "eps": p.eps,
            "delta": p.delta,
            "pairing": value,
            "target": target,
            "abs_error": error,
            "relative_error": error / scale,
            "runtime": _time.perf_counter() - tic,
        }

    logger.info(f"Capacity ladder: curve={chart.curve.name}, f={f_name}, {ladder.n_rungs} rungs, mode={mode}")
    rungs = _map_rungs(rung, len(params))
    errors = [r["relative_error"] for r in rungs]
    criteria = [
        Criterion("error_decreasing", strictly_decreasing(errors), errors[-1], 0.0, detail=_ratio_detail(errors)),
        Criterion("final_relative_error", errors[-1] < threshold, errors[-1], threshold),
    ]
    return ConvergenceReport(
        title=f"Capacity ladder: {chart.curve.name}, f={f_name}",
        rungs=rungs,
        criteria=criteria,
        metadata={"curve": chart.curve.name, "f": f_name, "t": t, "eps0": chart.eps0, "rule": ladder.rule.value, "mode": mode},
        runtime=_time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Energy ladder
# ---------------------------------------------------------------------------

def negative_control_params(eps0: float, eps: float) -> CapacityParams:
    """A collar as wide as the core (delta = eps, clipped below eps0 - eps)."""
    return CapacityParams(eps0, eps, min(eps, 0.99 * (eps0 - eps)))


def run_energy_ladder(
    config: RunConfig,
    ladder: Ladder,
    chart: Optional[TubeChart] = None,
    blowup_factor: Optional[float] = None,
    negative_control: bool = True,
) -> ConvergenceReport:
    """
    Normalized energy pair (max int a u^2, int int a |grad u|^2) / int a u0^2
    along the ladder, each rung on a grid of ladder.resolution(k) cells.

    The hard criterion is non-blow-up: no rung exceeds blowup_factor times
    the first rung in either quantity. The optional negative control runs the
    first rung with delta = eps and is informational only.
    """
    start = _time.perf_counter()
    chart = chart or build_chart(config)
    m = build_material(config)
    solve = build_solve_config(config)
    density = build_density(config)
    nodes_per_cell = int(config.quadrature["nodes_per_cell"])
    factor = float(blowup_factor or config.harness["energy_blowup_factor"])
    params = ladder.params()

    def run_one(p: CapacityParams, resolution: int) -> Dict[str, Any]:
        tic = _time.perf_counter()
        grid = build_grid(config, resolution)
        row: Dict[str, Any] = {"eps": p.eps, "delta": p.delta, "resolution": resolution}
        try:
            traj = ApproxSolver(chart, p, m, grid, solve, density, nodes_per_cell).run()
            rep = energy_report(traj, chart, p)
            energy, gradient = rep.normalized()
            row.update({
                "energy": energy,
                "gradient": gradient,
                "dt_capacity": rep.dt_capacity_term / rep.initial_energy if rep.initial_energy > 0 else 0.0,
                "advection_bound": rep.advection_bound,
                "growth_suspect": rep.growth_suspect,
                "error": "",
            })
        except CCFlowError as exc:
            logger.error(f"Energy rung eps={p.eps:.4g} failed: {exc}")
            row.update({"energy": math.nan, "gradient": math.nan, "dt_capacity": math.nan,
                        "advection_bound": math.nan, "growth_suspect": False, "error": str(exc)})
        row["runtime"] = _time.perf_counter() - tic
        return row

    logger.info(f"Energy ladder: curve={chart.curve.name}, {ladder.n_rungs} rungs, rule={ladder.rule.value}")
    rungs = _map_rungs(lambda k: run_one(params[k], ladder.resolution(k)), len(params))

    failed = [r for r in rungs if r["error"]]
    criteria = [Criterion("rungs_completed", not failed, float(len(failed)), 0.0,
                          detail="; ".join(r["error"] for r in failed))]
    for column in ("energy", "gradient"):
        values = np.array([r[column] for r in rungs], dtype=float)
        first = values[0]
        if not np.all(np.isfinite(values)):
            ratio, ok = math.inf, False
        elif first > 0:
            ratio = float(values.max() / first)
            ok = ratio <= factor
        else:
            ratio = 0.0 if np.all(values == 0) else math.inf
            ok = ratio == 0.0
        criteria.append(Criterion(f"{column}_uniform", ok, ratio, factor, detail=_ratio_detail(values)))

    bound = max((r["energy"] for r in rungs if np.isfinite(r["energy"])), default=0.0)
    metadata = {
        "curve": chart.curve.name,
        "rule": ladder.rule.value,
        "t_end": solve.t_end,
        "dt": solve.dt,
        "recorded_constant": bound,
    }

    if negative_control and rungs[0]["energy"] > 0 and np.isfinite(rungs[0]["energy"]):
        control = run_one(negative_control_params(ladder.eps0, params[0].eps), ladder.resolution(0))
        ratio = control["energy"] / rungs[0]["energy"] if np.isfinite(control["energy"]) else math.inf
        looks_uniform = ratio <= factor
        if looks_uniform:
            logger.warning(f"Negative control (delta = {control['delta']:.4g}) still looks uniform: ratio {ratio:.3g}")
        criteria.append(Criterion(
            "negative_control", not looks_uniform, ratio, factor, hard=False,
            detail="delta-rule violated on purpose; energies still look uniform" if looks_uniform else "delta-rule violation visible",
        ))
        metadata["negative_control"] = {k: control[k] for k in ("eps", "delta", "energy", "gradient")}

    return ConvergenceReport(
        title=f"Energy ladder: {chart.curve.name}",
        rungs=rungs,
        criteria=criteria,
        metadata=metadata,
        runtime=_time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Limit comparison
# ---------------------------------------------------------------------------

def space_time_norm(values: Sequence[np.ndarray], times: np.ndarray, grid1: Grid1D) -> float:
    """sqrt(sum_n (t_n - t_(n-1)) int_0^1 |values_n|^2 ds) over the curve nodes."""
    dt = np.diff(np.asarray(times, dtype=float))
    total = sum(d * grid1.integrate(np.sum(np.reshape(v, (grid1.n_s, -1)) ** 2, axis=-1)) for d, v in zip(dt, values[1:]))
    return math.sqrt(total)


def outside_tube_mask(chart: TubeChart, t: float, points: np.ndarray) -> np.ndarray:
    """True where a point does not lie in the chart image F(t, [-eps0, 1 + eps0] x D_eps0)."""
    _, inside = chart.invert_chart(t, points)
    return ~inside


def run_limit_comparison(
    config: RunConfig,
    ladder: Ladder,
    chart: Optional[TubeChart] = None,
    xi_floor: float = 1e-8,
) -> ConvergenceReport:
    """
    Approximating runs along the ladder against one limit run.

    Per rung: space-time distance of the disk averages over D_eps to u_C,
    Cauchy difference to the previous rung, bulk distance to the limit field
    outside the tube, relative distance of the disk-averaged transverse
    gradient to the xi closure and the weak residual of the rung's pair over
    the test-function basket. Hard criteria are the decreasing trends.
    """
    start = _time.perf_counter()
    chart = chart or build_chart(config)
    m = build_material(config)
    solve = build_solve_config(config)
    density = build_density(config)
    nodes_per_cell = int(config.quadrature["nodes_per_cell"])
    grid = build_grid(config)
    grid1 = build_grid1(config)
    eps0 = chart.eps0

    limit = run_limit(solve, chart, eps0, m, grid, grid1, build_limit_config(config))
    times = limit.times
    uc = [c.values for c in limit.curve]
    xi = [np.column_stack([x.nu, x.om]) for x in limit.xi]
    xi_norm = space_time_norm(xi, times, grid1)
    basket = function_basket(solve.t_end)
    s = grid1.nodes
    centers = grid.cell_centers()
    masks = [outside_tube_mask(chart, float(t), centers) for t in times]
    params = ladder.params()

    def rung(k: int) -> Dict[str, Any]:
        p = params[k]
        tic = _time.perf_counter()
        rgrid = build_grid(config, ladder.resolution(k))
        traj = ApproxSolver(chart, p, m, rgrid, solve, density, nodes_per_cell).run()
        if len(traj.snapshots) != len(times):
            raise CCFlowError("Approximating and limit runs kept different snapshot times")
        averages, transverse = [], []
        for field in traj.snapshots:
            value, grad3 = disk_average(chart, field, field.time, s, p.eps, density)
            averages.append(value)
            transverse.append(grad3[:, 1:])

        bulk_sq = 0.0
        for n in range(1, len(times)):
            interp = RegularGridInterpolator(rgrid.axes(), rgrid.reshape(traj.snapshots[n].values),
                                             bounds_error=False, fill_value=None)
            diff = (interp(centers) - limit.bulk[n].values) * masks[n]
            bulk_sq += (times[n] - times[n - 1]) * grid.integrate(diff ** 2)

        curves = [CurveField(grid1, a, float(t)) for a, t in zip(averages, times)]
        residuals = {phi.name: weak_residual(chart, m, eps0, traj.snapshots, curves, phi) for phi in basket}
        row: Dict[str, Any] = {
            "eps": p.eps,
            "delta": p.delta,
            "resolution": rgrid.shape[0],
            "limit_distance": space_time_norm([a - u for a, u in zip(averages, uc)], times, grid1),
            "bulk_distance": math.sqrt(bulk_sq),
            "xi_distance": space_time_norm([g - x for g, x in zip(transverse, xi)], times, grid1) / max(xi_norm, xi_floor),
            **{f"residual_{name}": r for name, r in residuals.items()},
            "runtime": _time.perf_counter() - tic,
        }
        row["_averages"] = averages
        return row

    logger.info(f"Limit comparison: curve={chart.curve.name}, {ladder.n_rungs} rungs")
    rungs = _map_rungs(rung, len(params))

    cauchy = [math.nan]
    for prev, cur in zip(rungs[:-1], rungs[1:]):
        cauchy.append(space_time_norm([a - b for a, b in zip(cur["_averages"], prev["_averages"])], times, grid1))
    for r, c in zip(rungs, cauchy):
        r.pop("_averages")
        r["cauchy"] = c

    distances = [r["limit_distance"] for r in rungs]
    xi_dist = [r["xi_distance"] for r in rungs]
    residual_max = max(abs(r[f"residual_{phi.name}"]) for r in rungs for phi in basket)
    criteria = [
        Criterion("cauchy_decreasing", strictly_decreasing(cauchy[1:]), cauchy[-1], 0.0, detail=_ratio_detail(cauchy[1:])),
        Criterion("limit_distance_decreasing", strictly_decreasing(distances), distances[-1], 0.0, detail=_ratio_detail(distances)),
        Criterion("xi_distance_decreasing", strictly_decreasing(xi_dist), xi_dist[-1], 0.0,
                  detail=_ratio_detail(xi_dist) + ("" if xi_norm > xi_floor else " (xi closure vanishes)")),
        Criterion("bulk_distance", math.isfinite(rungs[-1]["bulk_distance"]), rungs[-1]["bulk_distance"], math.inf, hard=False,
                  detail="informational, outside the tube"),
        Criterion("weak_residual", math.isfinite(residual_max), residual_max, math.inf, hard=False,
                  detail="informational, max over rungs and basket"),
    ]
    return ConvergenceReport(
        title=f"Limit comparison: {chart.curve.name}",
        rungs=rungs,
        criteria=criteria,
        metadata={
            "curve": chart.curve.name,
            "rule": ladder.rule.value,
            "limit_grid": list(grid.shape),
            "n_s": grid1.n_s,
            "r_avg": limit.r_avg,
            "lambda_ex": limit.lambda_ex,
            "limit_mass_drift": float(abs(limit.records["mass"].iloc[-1] - limit.records["mass"].iloc[0])),
        },
        runtime=_time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Weak residual under refinement
# ---------------------------------------------------------------------------

def run_residual_refinement(
    config: RunConfig,
    resolutions: Optional[Sequence[int]] = None,
    chart: Optional[TubeChart] = None,
    factor: Optional[float] = None,
    floor: float = 1e-10,
) -> ConvergenceReport:
    """
    Weak residual of limit runs on successively refined grids.

    Each basket function must shrink its residual by at least factor per
    refinement, unless the residual is already below floor times the
    coarsest pairing scale (the constant function, whose residual is the
    discrete mass balance).
    """
    start = _time.perf_counter()
    chart = chart or build_chart(config)
    m = build_material(config)
    solve = build_solve_config(config)
    grid1 = build_grid1(config)
    limit_config = build_limit_config(config)
    resolutions = list(resolutions or config.harness["refinement"])
    factor = float(factor or config.harness["residual_factor"])
    basket = function_basket(solve.t_end)

    def level(k: int) -> Dict[str, Any]:
        grid = build_grid(config, resolutions[k])
        traj = run_limit(solve, chart, chart.eps0, m, grid, grid1, limit_config)
        return {
            "resolution": resolutions[k],
            "residuals": {phi.name: weak_residual(chart, m, chart.eps0, traj.bulk, traj.curve, phi) for phi in basket},
            "runtime": traj.runtime,
        }

    logger.info(f"Residual refinement: curve={chart.curve.name}, resolutions={resolutions}")
    levels = _map_rungs(level, len(resolutions))
    rungs = [
        {"resolution": lv["resolution"], "function": name, "residual": r, "abs_residual": abs(r), "runtime": lv["runtime"]}
        for lv in levels
        for name, r in lv["residuals"].items()
    ]

    scale = float(np.abs(m.u0(build_grid(config, resolutions[0]).cell_centers())).max()) or 1.0
    criteria = []
    for phi in basket:
        values = [abs(lv["residuals"][phi.name]) for lv in levels]
        if max(values) <= floor * scale:
            criteria.append(Criterion(f"residual_{phi.name}", True, max(values), floor * scale, detail="at roundoff"))
            continue
        reductions = [a / b if b > 0 else math.inf for a, b in zip(values[:-1], values[1:])]
        worst = min(reductions)
        criteria.append(Criterion(f"residual_{phi.name}", worst >= factor, worst, factor, detail=_ratio_detail(values)))

    return ConvergenceReport(
        title=f"Weak-residual refinement: {chart.curve.name}",
        rungs=rungs,
        criteria=criteria,
        metadata={"curve": chart.curve.name, "resolutions": resolutions, "factor": factor, "n_s": grid1.n_s},
        runtime=_time.perf_counter() - start,
    )
