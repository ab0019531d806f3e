"""
Command-line entry point.

Usage:
    python -m src.cli geometry-check --curve helix-wiggle
    python -m src.cli capacity-ladder --curve segment --f const
    python -m src.cli solve-approx --config runs/moving.toml --set solver.t_end=0.5
    python -m src.cli compare --deep --out results/compare

Every command writes report.txt, report.csv, report.json and
resolved-config.toml into its output directory. Exit codes: 0 when all hard
criteria pass, 1 when one fails (or a run errors), 2 on usage or
configuration errors.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from config.run_config import RunConfig, load_run_config, save_run_config
from . import __version__
from .coefficients.materials import reference_function
from .coefficients.params import DeltaRule
from .exceptions import CCFlowError, ConfigError
from .geometry.chart import TubeChart
from .geometry.curves import build_curve
from .harness.ladders import (
    Ladder,
    run_capacity_ladder,
    run_energy_ladder,
    run_limit_comparison,
    run_residual_refinement,
)
from .harness.report import ReportWriter
from .harness.scenario import (
    build_capacity,
    build_chart,
    build_grid,
    build_scenario,
    build_solve_config,
)
from .harness.suites import (
    CheckResult,
    SuiteReport,
    conservation_check,
    run_coefficient_suite,
    run_constant_checks,
    run_distance_suite,
    run_gap_suite,
    run_geometry_suite,
)
from .mesh.grids import Grid1D
from .solvers.approx import ApproxSolver, energy_report
from .solvers.limit import LimitSolver, function_basket, weak_residual
from .solvers.output import approx_timeseries, limit_timeseries, write_snapshots

# Configure logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

COMMANDS = [
    "geometry-check",
    "coeff-check",
    "capacity-ladder",
    "solve-approx",
    "solve-limit",
    "energy-ladder",
    "compare",
    "version",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccflow",
        description="Concentrated-capacity diffusion-advection lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        if name == "version":
            continue
        cmd.add_argument("--config", help="TOML run file merged over the defaults")
        cmd.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                         help="Override one configuration value (repeatable)")
        cmd.add_argument("--out", help="Output directory (default: output.directory/<command>)")
        cmd.add_argument("--curve", help="Curve name, shortcut for --set geometry.curve=NAME")
        cmd.add_argument("--log-level", help="Root logging level (default: output.log_level)")
        if name == "capacity-ladder":
            cmd.add_argument("--f", dest="f", help="Test function: const, linear or bump")
        if name in ("capacity-ladder", "energy-ladder", "compare"):
            cmd.add_argument("--deep", action="store_true", help="Use the deep ladder and resolution cap")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.set)
    if args.curve:
        overrides.append(f"geometry.curve={args.curve}")
    if getattr(args, "f", None):
        overrides.append(f"harness.f={args.f}")
    return load_run_config(args.config, overrides)


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _merge_suites(title: str, suites: Sequence[SuiteReport]) -> SuiteReport:
    merged = SuiteReport(title=title)
    for suite in suites:
        prefix = suite.title.split(":")[0].lower().replace(" suite", "").replace(" ", "-")
        for check in suite.checks:
            check.name = f"{prefix}/{check.name}"
            merged.checks.append(check)
        merged.metadata.update({k: v for k, v in suite.metadata.items() if not isinstance(v, list)})
        merged.runtime += suite.runtime
    return merged


def cmd_geometry_check(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    har = config.harness
    seed = int(har["seed"])
    chart = build_chart(config, validate=False)
    p = build_capacity(config)
    suites = [
        run_geometry_suite(chart, int(har["geometry_samples"]), seed),
        run_distance_suite(p, int(har["distance_samples"]), seed),
    ]
    if suites[0].check("jacobian_positive").passed:
        suites.append(run_gap_suite(chart, p.eps, har["gap_deltas"], int(har["monte_carlo_samples"]), seed))
    return [ReportWriter(_merge_suites(f"Geometry check: {chart.curve.name}", suites))]


def cmd_coeff_check(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    sc = build_scenario(config)
    times = [0.0] if sc.chart.curve.static else [0.0, 0.5 * sc.chart.t_final, sc.chart.t_final]
    suites = [
        run_coefficient_suite(sc.chart, sc.params, sc.material, seed=int(config.harness["seed"]), t=t)
        for t in times
    ]
    for suite, t in zip(suites, times):
        suite.title = f"Coefficients t={t:g}"
    return [ReportWriter(_merge_suites(f"Coefficient check: {sc.chart.curve.name}", suites))]


def cmd_capacity_ladder(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    chart = build_chart(config)
    ladder = Ladder.from_config(config, rule=DeltaRule.EPS3, n_rungs=int(config.ladder["deep_rungs"]))
    name = config.harness["f"]
    report = run_capacity_ladder(chart, reference_function(name), 0.0, ladder, build_grid(config), f_name=name)
    return [ReportWriter(report, error_columns=["relative_error"])]


def cmd_solve_approx(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    sc = build_scenario(config)
    solver = ApproxSolver(sc.chart, sc.params, sc.material, sc.grid, sc.solve, sc.density, sc.nodes_per_cell)
    traj = solver.run()
    energy = energy_report(traj, sc.chart, sc.params)

    report = SuiteReport(
        title=f"Approximating run: {sc.chart.curve.name}",
        metadata={**sc.params.to_dict(), "grid": list(sc.grid.shape), **sc.solve.to_dict(), **energy.to_dict()},
        runtime=traj.runtime,
    )
    report.checks.append(conservation_check(traj.records, "mass", tol=1e-8))
    energy_ok = not energy.growth_suspect
    report.checks.append(CheckResult("energy_growth", energy_ok, energy.normalized()[0], 10.0, hard=False,
                                     detail="max energy over initial energy"))

    approx_timeseries(traj, out / "approx-timeseries.csv")
    if sc.solve.write_vtk:
        write_snapshots(traj.snapshots, out / "vtk", prefix="u")
    return [ReportWriter(report)]


def _constant_check_charts(config: RunConfig) -> Dict[str, TubeChart]:
    geo = config.geometry
    eps0 = float(geo["eps0"])
    kwargs = {"t_final": float(geo["t_final"]), "domain": geo["domain"]}
    return {
        "static": TubeChart(build_curve("segment", {}, **kwargs), eps0),
        "moving": TubeChart(build_curve("translating-segment", {}, **kwargs), eps0),
    }


def cmd_solve_limit(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    sc = build_scenario(config)
    solver = LimitSolver(sc.chart, sc.material, sc.grid, sc.grid1, sc.solve, sc.limit)
    traj = solver.run()

    report = SuiteReport(
        title=f"Limit run: {sc.chart.curve.name}",
        metadata={
            "grid": list(sc.grid.shape),
            "n_s": sc.grid1.n_s,
            "r_avg": traj.r_avg,
            "lambda_ex": traj.lambda_ex,
            **sc.solve.to_dict(),
        },
        runtime=traj.runtime,
    )
    report.checks.append(conservation_check(traj.records, "mass", tol=1e-8))
    for phi in function_basket(sc.solve.t_end):
        r = weak_residual(sc.chart, sc.material, sc.chart.eps0, traj.bulk, traj.curve, phi)
        report.checks.append(CheckResult(
            f"weak_residual_{phi.name}", math.isfinite(r), abs(r), math.inf, hard=False,
            detail="informational, no threshold at a single resolution (see compare)",
        ))

    charts = _constant_check_charts(config)
    dt = sc.solve.dt
    constants = run_constant_checks(
        charts["static"],
        charts["moving"],
        sc.params,
        build_grid(config, 16),
        Grid1D(sc.grid1.n_s),
        build_solve_config(config, t_end=min(4 * dt, charts["static"].t_final), snapshot_every=1),
    )
    report.checks.extend(constants.checks)

    limit_timeseries(traj, out / "limit-timeseries.csv", out / "curve-field.csv")
    if sc.solve.write_vtk:
        write_snapshots(traj.bulk, out / "vtk", prefix="u")
    return [ReportWriter(report)]


def cmd_energy_ladder(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    ladder = Ladder.from_config(config, deep=args.deep, rule=DeltaRule.EPS11)
    return [ReportWriter(run_energy_ladder(config, ladder), error_columns=["energy", "gradient"])]


def cmd_compare(config: RunConfig, args: argparse.Namespace, out: Path) -> List[ReportWriter]:
    ladder = Ladder.from_config(config, deep=args.deep, rule=DeltaRule.EPS3)
    comparison = run_limit_comparison(config, ladder)
    refinement = run_residual_refinement(config)
    return [
        ReportWriter(comparison, error_columns=["limit_distance", "cauchy", "xi_distance"]),
        ReportWriter(refinement),
    ]


HANDLERS: Dict[str, Callable[[RunConfig, argparse.Namespace, Path], List[ReportWriter]]] = {
    "geometry-check": cmd_geometry_check,
    "coeff-check": cmd_coeff_check,
    "capacity-ladder": cmd_capacity_ladder,
    "solve-approx": cmd_solve_approx,
    "solve-limit": cmd_solve_limit,
    "energy-ladder": cmd_energy_ladder,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Returns:
        Exit code (0 pass, 1 criteria failure or run error, 2 usage/config error)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    if args.command == "version":
        print(f"ccflow {__version__}")
        return EXIT_OK

    try:
        config = resolve_config(args)
    except ConfigError as exc:
        setup_logging(args.log_level or "INFO")
        logger.error(f"Configuration error: {exc}")
        return EXIT_USAGE

    setup_logging(args.log_level or config.output["log_level"])
    out = Path(args.out) if args.out else Path(config.output["directory"]) / args.command
    out.mkdir(parents=True, exist_ok=True)
    save_run_config(config, out / "resolved-config.toml")

    try:
        writers = HANDLERS[args.command](config, args, out)
    except ConfigError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_USAGE
    except CCFlowError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_FAIL

    plots = bool(config.output["write_plots"])
    passed = True
    for k, writer in enumerate(writers):
        target = out if k == 0 else out / writer.report.title.split(":")[0].lower().replace(" ", "-")
        writer.write_outputs(target, plots=plots)
        print(writer.text())
        passed = passed and writer.report.passed
    return EXIT_OK if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
