"""
Scenario builders.

Turn a RunConfig into the objects the solvers and suites work with: chart,
grids, capacity and material parameters, solve settings and quadrature
densities.
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

from config.run_config import RunConfig
from ..coefficients.params import CapacityParams, DeltaRule, MaterialParams
from ..exceptions import ConfigError
from ..geometry.chart import TubeChart
from ..geometry.curves import build_curve
from ..mesh.grids import Grid1D, Grid3D
from ..mesh.quadrature import QuadratureDensity
from ..solvers.approx import SolveConfig
from ..solvers.limit import LimitConfig

# Configure logging
logger = logging.getLogger(__name__)


def thread_count(name: str = "CCFLOW_THREADS", default: int = 1) -> int:
    """Worker count from the environment; unset, blank or invalid values give default."""
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring {name}={raw!r}: not an integer")
        return default
    return max(1, value)


def build_chart(config: RunConfig, validate: bool = True, curve: Optional[str] = None) -> TubeChart:
    """Chart around the configured curve."""
    geo = config.geometry
    spec = build_curve(
        curve or geo["curve"],
        geo["curve_params"],
        t_final=float(geo["t_final"]),
        domain=geo["domain"],
        curve_file=geo["curve_file"] or None,
    )
    return TubeChart(
        spec,
        eps0=float(geo["eps0"]),
        fd_step=float(geo["fd_step"]),
        seed_points=int(geo["seed_points"]),
        frame_nodes=int(geo["frame_nodes"]),
        validate=validate,
        validation_density=tuple(geo["validation_density"]),
    )


def build_grid(config: RunConfig, resolution: Optional[Sequence[int]] = None) -> Grid3D:
    """Grid over the configured box; resolution may be an int (cube) or a triple."""
    res = config.geometry["resolution"] if resolution is None else resolution
    if isinstance(res, int):
        res = (res, res, res)
    return Grid3D(tuple(tuple(b) for b in config.geometry["domain"]), tuple(res))


def build_grid1(config: RunConfig) -> Grid1D:
    return Grid1D(int(config.limit["n_s"]))


def build_capacity(
    config: RunConfig,
    eps: Optional[float] = None,
    rule: Optional[DeltaRule] = None,
) -> CapacityParams:
    """CapacityParams from the configured (or given) eps and delta-rule."""
    cap = config.capacity
    rule = rule or DeltaRule(config.solver["delta_rule"])
    try:
        return CapacityParams.from_rule(
            eps0=float(config.geometry["eps0"]),
            eps=float(cap["eps"] if eps is None else eps),
            rule=rule,
            constant=float(cap["delta_constant"]),
            delta=float(cap["delta"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="capacity") from exc


def build_material(config: RunConfig, validate: bool = True) -> MaterialParams:
    try:
        m = MaterialParams.from_config(config.material)
        if validate:
            geo = config.geometry
            m.validate(float(geo["eps0"]), geo["domain"], float(geo["t_final"]), seed=int(config.harness["seed"]))
    except ValueError as exc:
        raise ConfigError(str(exc), key="material") from exc
    return m


def build_solve_config(config: RunConfig, **overrides: Any) -> SolveConfig:
    values: Dict[str, Any] = {**config.solver, **overrides}
    return SolveConfig.from_config(values)


def build_density(config: RunConfig) -> QuadratureDensity:
    return QuadratureDensity.from_config(config.quadrature, n_s=int(config.limit["n_s"]))


def build_limit_config(config: RunConfig) -> LimitConfig:
    return LimitConfig.from_config(config.limit)


@dataclass
class Scenario:
    """
    Everything a single run needs.

    Attributes:
        config: Source configuration
        chart: Tube chart
        grid: Bulk grid
        grid1: Curve mesh
        params: Capacity parameters
        material: Material parameters
        solve: Time stepping settings
        density: Tube quadrature densities
        limit: Limit-solver settings
    """
    config: RunConfig
    chart: TubeChart
    grid: Grid3D
    grid1: Grid1D
    params: CapacityParams
    material: MaterialParams
    solve: SolveConfig
    density: QuadratureDensity
    limit: LimitConfig

    @property
    def nodes_per_cell(self) -> int:
        return int(self.config.quadrature["nodes_per_cell"])


def build_scenario(config: RunConfig, validate: bool = True) -> Scenario:
    """Build the full scenario of a configuration."""
    return Scenario(
        config=config,
        chart=build_chart(config, validate=validate),
        grid=build_grid(config),
        grid1=build_grid1(config),
        params=build_capacity(config),
        material=build_material(config, validate=validate),
        solve=build_solve_config(config),
        density=build_density(config),
        limit=build_limit_config(config),
    )
