"""
Verification Suites

Property suites over the geometry, distance, coefficient, gap-measure and
exact-solution layers. Suites never raise on a failed property: each check
becomes a CheckResult with its worst error and, where it makes sense, the
point where it occurred.

Features:
- Chart identities against numeric-inverse and finite-difference oracles
- Closed-form d_eps against a brute-force nearest-point search
- Ellipticity and advection bounds of the coefficients
- Gap-measure linearity in delta with an analytic and a Monte Carlo oracle
- Constant steady states of both solvers and the vanishing xi closure
"""

import logging
import time as _time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..coefficients.fields import (
    advection_v,
    capacity_a,
    cutoff_chi,
    diffusivity_K,
    dist_core,
    dist_core_grad,
    dist_core_reference,
)
from ..coefficients.materials import FieldSpec, build_scalar_field, build_vector_field
from ..coefficients.params import CapacityParams, MaterialParams
from ..exceptions import CCFlowError, ChartValidityError
from ..geometry.chart import TubeChart
from ..mesh.grids import Grid1D, Grid3D
from ..mesh.quadrature import (
    QuadratureDensity,
    collar_measure_flat,
    gap_measure,
    gap_measure_monte_carlo,
)
from ..solvers.approx import ApproxSolver, BulkField, SolveConfig
from ..solvers.limit import CurveField, LimitSolver, xi_closure
from .report import Criterion

# Configure logging
logger = logging.getLogger(__name__)

ALGEBRAIC_TOL = 1e-10
DERIVATIVE_TOL = 1e-8


@dataclass
class CheckResult:
    """
    Outcome of one property check.

    Attributes:
        name: Property name
        passed: Whether the worst error stayed within tolerance
        worst_error: Largest observed error
        tolerance: Allowed error
        witness: Point with the worst (or first failing) error
        hard: Whether the check gates the exit code
        detail: Free-form note
    """
    name: str
    passed: bool
    worst_error: float
    tolerance: float
    witness: Optional[List[float]] = None
    hard: bool = True
    detail: str = ""

    def to_criterion(self) -> Criterion:
        detail = self.detail
        if self.witness is not None:
            detail = f"{detail} witness={self.witness}".strip()
        return Criterion(self.name, self.passed, self.worst_error, self.tolerance, self.hard, detail)


@dataclass
class SuiteReport:
    """
    Collection of checks from one suite run.

    Attributes:
        title: Suite name
        checks: Individual results
        metadata: Parameters of the run
        runtime: Wall time in seconds
    """
    title: str
    checks: List[CheckResult] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    @property
    def criteria(self) -> List[Criterion]:
        return [c.to_criterion() for c in self.checks]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "check": c.name,
                "passed": c.passed,
                "worst_error": c.worst_error,
                "tolerance": c.tolerance,
                "hard": c.hard,
                "witness": c.witness,
            }
            for c in self.checks
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "runtime": self.runtime,
            "metadata": self.metadata,
            "checks": self.to_frame().to_dict(orient="records"),
        }


def _worst(name: str, errors: np.ndarray, tol: float, points: np.ndarray, hard: bool = True, detail: str = "") -> CheckResult:
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        return CheckResult(name, True, 0.0, tol, hard=hard, detail="no samples")
    if not np.all(np.isfinite(errors)):
        i = int(np.flatnonzero(~np.isfinite(errors))[0])
        return CheckResult(name, False, float("inf"), tol, [float(x) for x in points[i]], hard, detail)
    i = int(np.argmax(errors))
    worst = float(errors[i])
    return CheckResult(name, worst <= tol, worst, tol, [float(x) for x in points[i]], hard, detail)


def _matrix_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Max-entry difference relative to max(1, max |b|), per sample."""
    diff = np.abs(a - b).reshape(a.shape[0], -1).max(axis=-1)
    scale = np.maximum(1.0, np.abs(b).reshape(b.shape[0], -1).max(axis=-1))
    return diff / scale


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def sample_chart_points(chart: TubeChart, n_samples: int, seed: int = 42, n_times: int = 10, margin: float = 0.9):
    """
    Random (t, s, nu, omega) samples; t takes n_times distinct values.

    Radii stay below margin * eps0 and s inside [-margin eps0, 1 + margin eps0]
    so finite-difference oracles stay inside the chart domain.
    """
    rng = np.random.default_rng(seed)
    T = chart.t_final
    if chart.curve.static:
        times = np.zeros(1)
    else:
        times = np.sort(rng.uniform(0.05 * T, 0.95 * T, n_times))
    t = times[np.arange(n_samples) % len(times)]
    e = chart.eps0 * margin
    s = rng.uniform(-e, 1.0 + e, n_samples)
    rho = e * np.sqrt(rng.uniform(0.0, 1.0, n_samples))
    th = rng.uniform(0.0, 2 * np.pi, n_samples)
    return t, s, rho * np.cos(th), rho * np.sin(th)


def _by_time(t: np.ndarray):
    for tau in np.unique(t):
        yield float(tau), np.flatnonzero(t == tau)


def _richardson(f, x: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order centered derivative (4 D(h/2) - D(h)) / 3."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def run_geometry_suite(
    chart: TubeChart,
    n_samples: int = 1000,
    seed: int = 42,
    n_times: int = 10,
    oracle_step: float = 1e-3,
) -> SuiteReport:
    """
    Chart identities on random points.

    Algebraic identities (closed-form J_F, metric inverse, grad F^-1, the
    block inverse of the space-time Jacobian, frame orthonormality, chart
    inversion) are held to 1e-10; derivative identities (grad F and d_t F
    against Richardson-extrapolated differences of F) to 1e-8. A chart with
    J_F <= 0 somewhere reports the failure with its witness and skips the rest.
    """
    start = _time.perf_counter()
    report = SuiteReport(
        title=f"Geometry suite: {chart.curve.name}",
        metadata={"curve": chart.curve.name, "eps0": chart.eps0, "n_samples": n_samples, "seed": seed},
    )
    try:
        j_min = chart.check_validity()
        report.checks.append(CheckResult("jacobian_positive", True, 0.0, 0.0, detail=f"min J_F = {j_min:.6g}"))
    except ChartValidityError as exc:
        report.checks.append(CheckResult("jacobian_positive", False, float("inf"), 0.0, list(exc.witness or ()), detail=str(exc)))
        report.runtime = _time.perf_counter() - start
        logger.warning(f"Geometry suite stopped: {exc}")
        return report

    t, s, nu, om = sample_chart_points(chart, n_samples, seed, n_times)
    pts = np.column_stack([t, s, nu, om])
    errs: Dict[str, np.ndarray] = {k: np.zeros(n_samples) for k in (
        "jacobian_closed_form", "metric_inverse", "inverse_gradient", "block_inverse",
        "frame_orthonormal", "chart_gradient", "curve_velocity", "chart_inversion",
    )}

    h_s = oracle_step * max(b[1] - b[0] for b in chart.curve.domain)
    h_r = oracle_step * chart.eps0
    h_t = oracle_step * chart.t_final
    for tau, idx in _by_time(t):
        ss, nn, oo = s[idx], nu[idx], om[idx]
        G = chart.grad_F(tau, ss, nn, oo)
        J = chart.det_J_F(tau, ss, nn, oo)
        errs["jacobian_closed_form"][idx] = np.abs(J - np.linalg.det(G)) / np.maximum(1.0, np.abs(J))
        errs["metric_inverse"][idx] = _matrix_error(chart.metric_inv(tau, ss, nn, oo), np.linalg.inv(np.swapaxes(G, -1, -2) @ G))
        errs["inverse_gradient"][idx] = _matrix_error(chart.inv_grad_F(tau, ss, nn, oo), np.linalg.inv(G))
        errs["block_inverse"][idx] = _matrix_error(chart.D_F_inv(tau, ss, nn, oo), np.linalg.inv(chart.D_F(tau, ss, nn, oo)))

        t_vec, n_vec, b_vec = chart.frame_arrays(tau, ss)
        R = np.stack([t_vec, n_vec, b_vec], axis=-1)
        errs["frame_orthonormal"][idx] = _matrix_error(np.swapaxes(R, -1, -2) @ R, np.broadcast_to(np.eye(3), R.shape))

        cols = [
            _richardson(lambda x: chart.point(tau, x, nn, oo), ss, h_s),
            _richardson(lambda x: chart.point(tau, ss, x, oo), nn, h_r),
            _richardson(lambda x: chart.point(tau, ss, nn, x), oo, h_r),
        ]
        errs["chart_gradient"][idx] = _matrix_error(G, np.stack(cols, axis=-1))

        if not chart.curve.static:
            vel = chart.curve_velocity(tau, ss, nn, oo)
            oracle = (4 * (chart.point(tau + h_t / 2, ss, nn, oo) - chart.point(tau - h_t / 2, ss, nn, oo)) / h_t
                      - (chart.point(tau + h_t, ss, nn, oo) - chart.point(tau - h_t, ss, nn, oo)) / (2 * h_t)) / 3
            errs["curve_velocity"][idx] = _matrix_error(vel[..., None], oracle[..., None])

        x = chart.point(tau, ss, nn, oo)
        coords, inside = chart.invert_chart(tau, x)
        back = np.where(inside[:, None], coords, np.inf)
        errs["chart_inversion"][idx] = np.abs(back - np.column_stack([ss, nn, oo])).max(axis=-1)

    for name in ("jacobian_closed_form", "metric_inverse", "inverse_gradient", "block_inverse", "frame_orthonormal", "chart_inversion"):
        report.checks.append(_worst(name, errs[name], ALGEBRAIC_TOL, pts))
    report.checks.append(_worst("chart_gradient", errs["chart_gradient"], DERIVATIVE_TOL, pts))
    if not chart.curve.static:
        report.checks.append(_worst("curve_velocity", errs["curve_velocity"], DERIVATIVE_TOL, pts))

    try:
        beta = chart.coercivity_beta()
        report.checks.append(CheckResult("coercivity_beta", True, beta, 0.0, hard=False, detail="smallest eigenvalue of G^-1 J_F"))
    except ChartValidityError as exc:
        report.checks.append(CheckResult("coercivity_beta", False, 0.0, 0.0, detail=str(exc)))

    report.runtime = _time.perf_counter() - start
    logger.info(f"{report.title}: {'PASS' if report.passed else 'FAIL'} in {report.runtime:.2f}s")
    return report


# ---------------------------------------------------------------------------
# Distance and cutoff
# ---------------------------------------------------------------------------

def run_distance_suite(p: CapacityParams, n_samples: int = 10000, seed: int = 42) -> SuiteReport:
    """
    Closed-form d_eps against brute force, |grad d_eps| = 1 off the core and
    the cutoff values.
    """
    start = _time.perf_counter()
    rng = np.random.default_rng(seed)
    report = SuiteReport(title="Distance suite", metadata={**p.to_dict(), "n_samples": n_samples, "seed": seed})

    e = p.eps0
    pts = np.column_stack([
        rng.uniform(-e, 1.0 + e, n_samples),
        rng.uniform(-e, e, n_samples),
        rng.uniform(-e, e, n_samples),
    ])
    d = dist_core(p, pts[:, 0], pts[:, 1], pts[:, 2])
    ref = dist_core_reference(p, pts)
    report.checks.append(_worst("distance_closed_form", np.abs(d - ref), 1e-6, pts))

    off = d > 1e-3
    h = 1e-6
    fd = np.stack([
        (dist_core(p, *(pts[off] + h * np.eye(3)[k]).T) - dist_core(p, *(pts[off] - h * np.eye(3)[k]).T)) / (2 * h)
        for k in range(3)
    ], axis=-1)
    report.checks.append(_worst("gradient_unit_norm", np.abs(np.linalg.norm(fd, axis=-1) - 1.0), 1e-4, pts[off]))
    g = dist_core_grad(p, pts[off, 0], pts[off, 1], pts[off, 2])
    report.checks.append(_worst("gradient_closed_form", np.abs(g - fd).max(axis=-1), 1e-4, pts[off]))

    r = np.linspace(0.0, 2 * p.delta, 101)
    chi = cutoff_chi(p.delta, r)
    chi_err = max(abs(chi[0] - 1.0), abs(float(cutoff_chi(p.delta, p.delta))), float(np.abs(chi[r >= p.delta]).max()))
    report.checks.append(CheckResult("cutoff_values", chi_err <= 1e-15, chi_err, 1e-15))

    report.runtime = _time.perf_counter() - start
    logger.info(f"{report.title}: {'PASS' if report.passed else 'FAIL'} in {report.runtime:.2f}s")
    return report


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

def run_coefficient_suite(
    chart: TubeChart,
    p: CapacityParams,
    m: MaterialParams,
    n_samples: int = 2000,
    seed: int = 42,
    t: float = 0.0,
) -> SuiteReport:
    """
    Coefficient bounds on random ambient points, half of them inside the tube.

    Checks a in [1, eps0^2/eps^2], a = eps0^2/eps^2 on the core,
    q^T K q >= theta a |q|^2 and |v_(eps, delta)| <= M a with
    M = max(sup |v|, sup |v_C|).
    """
    start = _time.perf_counter()
    rng = np.random.default_rng(seed)
    report = SuiteReport(title=f"Coefficient suite: {chart.curve.name}", metadata={**p.to_dict(), "t": t, "seed": seed})

    n_tube = n_samples // 2
    s = rng.uniform(-p.eps - p.delta, 1.0 + p.eps + p.delta, n_tube)
    rho = min(p.eps + 2 * p.delta, chart.eps0) * np.sqrt(rng.uniform(0, 1, n_tube))
    th = rng.uniform(0, 2 * np.pi, n_tube)
    s = np.clip(s, -chart.eps0, 1.0 + chart.eps0)
    tube_pts = chart.point(t, s, rho * np.cos(th), rho * np.sin(th))
    lo = np.array([b[0] for b in chart.curve.domain])
    hi = np.array([b[1] for b in chart.curve.domain])
    x = np.vstack([tube_pts, rng.uniform(lo, hi, (n_samples - n_tube, 3))])

    a = capacity_a(chart, p, t, x)
    bound_err = np.maximum(1.0 - a, a - p.contrast).clip(min=0.0)
    report.checks.append(_worst("capacity_range", bound_err, 1e-12, x))

    core = chart.point(t, rng.uniform(0.05, 0.95, 64), np.zeros(64), np.zeros(64))
    report.checks.append(_worst("capacity_on_core", np.abs(capacity_a(chart, p, t, core) - p.contrast) / p.contrast, 1e-12, core))

    K = diffusivity_K(chart, p, m, t, x)
    K = 0.5 * (K + np.swapaxes(K, -1, -2))
    lam_min = np.linalg.eigvalsh(K)[:, 0]
    deficit = np.maximum(m.theta * a - lam_min, 0.0) / (m.theta * a)
    report.checks.append(_worst("ellipticity", deficit, 1e-12, x))

    v = advection_v(chart, p, m, t, x)
    M = max(float(np.linalg.norm(m.v(t, x), axis=-1).max()), float(np.linalg.norm(m.v_C(t, x), axis=-1).max()))
    excess = np.maximum(np.linalg.norm(v, axis=-1) - M * a, 0.0) / np.maximum(M * a, 1e-300)
    report.checks.append(_worst("advection_bound", excess, 1e-12, x, detail=f"M = {M:.6g}"))

    report.runtime = _time.perf_counter() - start
    logger.info(f"{report.title}: {'PASS' if report.passed else 'FAIL'} in {report.runtime:.2f}s")
    return report


# ---------------------------------------------------------------------------
# Gap measure
# ---------------------------------------------------------------------------

def run_gap_suite(
    chart: TubeChart,
    eps: float,
    deltas: Sequence[float],
    mc_samples: int = 10_000_000,
    seed: int = 42,
    t: float = 0.0,
    density: Optional[QuadratureDensity] = None,
) -> SuiteReport:
    """
    Gap-measure linearity in delta.

    mu/delta must stay within 10% across the halving sequence, each halving
    must give a ratio in [0.4, 0.6], the quadrature must match the exact
    flat measure and, at the first delta, a Monte Carlo estimate to 1%.
    """
    start = _time.perf_counter()
    report = SuiteReport(title=f"Gap-measure suite: {chart.curve.name}", metadata={"eps": eps, "deltas": list(deltas), "mc_samples": mc_samples})

    rows = []
    for delta in deltas:
        p = CapacityParams(chart.eps0, eps, delta)
        flat, mapped = gap_measure(chart, p, t, density)
        rows.append({"delta": delta, "flat": flat, "mapped": mapped, "exact": collar_measure_flat(eps, delta)})
    table = pd.DataFrame(rows)
    table["ratio"] = table["flat"] / table["delta"]
    report.metadata["table"] = table.to_dict(orient="records")

    spread = float(table["ratio"].max() / table["ratio"].min() - 1.0)
    report.checks.append(CheckResult("measure_over_delta_stable", spread <= 0.10, spread, 0.10))

    halving = (table["flat"].to_numpy()[1:] / table["flat"].to_numpy()[:-1])
    off = np.maximum(0.4 - halving, halving - 0.6).clip(min=0.0)
    report.checks.append(CheckResult(
        "halving_ratio", bool(np.all(off == 0)), float(off.max()), 0.0, detail=f"ratios {np.round(halving, 4).tolist()}"
    ))

    exact_err = float((np.abs(table["flat"] - table["exact"]) / table["exact"]).max())
    report.checks.append(CheckResult("quadrature_vs_exact", exact_err <= 1e-10, exact_err, 1e-10))

    mapped_ratio = float((table["mapped"] / table["delta"]).max())
    report.checks.append(CheckResult("mapped_measure_over_delta", True, mapped_ratio, 0.0, hard=False, detail="image of the collar in Omega"))

    p0 = CapacityParams(chart.eps0, eps, deltas[0])
    mc = gap_measure_monte_carlo(p0, mc_samples, seed)
    mc_err = abs(rows[0]["flat"] - mc) / mc if mc > 0 else float("inf")
    report.checks.append(CheckResult("monte_carlo", mc_err <= 0.01, mc_err, 0.01, detail=f"Monte Carlo estimate {mc:.6g}"))

    report.runtime = _time.perf_counter() - start
    logger.info(f"{report.title}: {'PASS' if report.passed else 'FAIL'} in {report.runtime:.2f}s")
    return report


# ---------------------------------------------------------------------------
# Exact solutions
# ---------------------------------------------------------------------------

def constant_material(k_s: float = 2.0, k_n: float = 1.0, value: float = 1.5, v_C=None) -> MaterialParams:
    """Material with constant u0 and zero velocities (v_C optional)."""
    zero = build_vector_field(FieldSpec("zero"))
    return MaterialParams(
        k0=1.0,
        k_s=lambda s, nu, om: np.full(np.broadcast_shapes(np.shape(s), np.shape(nu), np.shape(om)), k_s),
        k_n=lambda s, nu, om: np.full(np.broadcast_shapes(np.shape(s), np.shape(nu), np.shape(om)), k_n),
        theta=0.5,
        v=zero,
        v_C=v_C or zero,
        u0=build_scalar_field(FieldSpec("constant", {"value": value})),
    )


def run_constant_checks(
    chart: TubeChart,
    moving_chart: TubeChart,
    p: CapacityParams,
    grid: Grid3D,
    grid1: Grid1D,
    solve: SolveConfig,
    value: float = 1.5,
    tol: float = 1e-10,
) -> SuiteReport:
    """
    Constant data with zero velocities on a static curve is kept by both
    solvers; the xi closure vanishes when v_C follows the curve motion.

    moving_chart must be a rigidly translating curve (constant d_t F).
    """
    start = _time.perf_counter()
    report = SuiteReport(title="Constant-state checks", metadata={"grid": list(grid.shape), "n_s": grid1.n_s, "value": value})
    m = constant_material(value=value)

    try:
        approx = ApproxSolver(chart, p, m, grid, solve).run()
        err = max(float(np.abs(f.values - value).max()) for f in approx.snapshots) / value
        report.checks.append(CheckResult("approx_constant_state", err <= tol, err, tol))
    except CCFlowError as exc:
        report.checks.append(CheckResult("approx_constant_state", False, float("inf"), tol, detail=str(exc)))

    try:
        limit = LimitSolver(chart, m, grid, grid1, solve).run()
        err = max(
            max(float(np.abs(b.values - value).max()), float(np.abs(c.values - value).max()))
            for b, c in zip(limit.bulk, limit.curve)
        ) / value
        report.checks.append(CheckResult("limit_constant_state", err <= tol, err, tol))
    except CCFlowError as exc:
        report.checks.append(CheckResult("limit_constant_state", False, float("inf"), tol, detail=str(exc)))

    t_mid = 0.5 * moving_chart.t_final
    velocity = moving_chart.curve_velocity(t_mid, np.array([0.5]))[0]
    following = constant_material(value=value, v_C=build_vector_field(FieldSpec("constant", {"value": velocity.tolist()})))
    uc = CurveField(grid1, np.full(grid1.n_s, value), t_mid)
    xi = xi_closure(moving_chart, following, uc, t_mid)
    err = float(max(np.abs(xi.nu).max(), np.abs(xi.om).max()))
    report.checks.append(CheckResult("xi_vanishes_when_following", err <= tol, err, tol))

    report.runtime = _time.perf_counter() - start
    logger.info(f"{report.title}: {'PASS' if report.passed else 'FAIL'} in {report.runtime:.2f}s")
    return report


def conservation_check(records: pd.DataFrame, column: str = "mass", tol: float = 1e-8, min_steps: int = 0) -> CheckResult:
    """Largest relative drift of a mass column against its first value."""
    mass = records[column].to_numpy()
    scale = max(abs(float(mass[0])), 1e-300)
    drift = float(np.abs(mass - mass[0]).max() / scale)
    steps = len(mass) - 1
    passed = drift <= tol and steps >= min_steps
    detail = f"{steps} steps" + ("" if steps >= min_steps else f" (< {min_steps} required)")
    return CheckResult(f"{column}_conservation", passed, drift, tol, detail=detail)
