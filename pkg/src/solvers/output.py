"""
Solver Output Module

VTK legacy structured-points snapshots of bulk fields and CSV time series of
trajectories.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .approx import ApproxTrajectory, BulkField
from .limit import LimitTrajectory

# Configure logging
logger = logging.getLogger(__name__)


def write_vtk(field: BulkField, filepath: Union[str, Path], name: str = "u", extra: Optional[Dict[str, np.ndarray]] = None) -> Path:
    """
    Write a BulkField as VTK legacy STRUCTURED_POINTS with CELL_DATA.

    Args:
        field: Field to write
        filepath: Output path
        name: Scalar name of the field
        extra: Further cell arrays by name (same length as the field)
    """
    grid = field.grid
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny, nz = grid.shape
    arrays = {name: field.values, **(extra or {})}
    lines = [
        "# vtk DataFile Version 3.0",
        f"{name} at t={field.time:.10g}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}",
        "ORIGIN {} {} {}".format(*grid.lower),
        "SPACING {} {} {}".format(*grid.spacing),
        f"CELL_DATA {grid.n_cells}",
    ]
    for key, values in arrays.items():
        # VTK orders cells with x fastest
        ordered = grid.reshape(np.asarray(values, dtype=float)).ravel(order="F")
        lines.append(f"SCALARS {key} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.12g}" for v in ordered)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_snapshots(fields: List[BulkField], directory: Union[str, Path], prefix: str = "u") -> List[Path]:
    """One VTK file per snapshot, numbered in order."""
    directory = Path(directory)
    paths = [write_vtk(f, directory / f"{prefix}_{k:04d}.vtk", name=prefix) for k, f in enumerate(fields)]
    logger.info(f"Wrote {len(paths)} VTK snapshots to {directory}")
    return paths


def approx_timeseries(trajectory: ApproxTrajectory, filepath: Union[str, Path]) -> Path:
    """Mass/energy records of an approximating run as CSV."""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.records.to_csv(path, index=False)
    return path


def limit_timeseries(trajectory: LimitTrajectory, records_path: Union[str, Path], curve_path: Union[str, Path]) -> List[Path]:
    """Mass records and the (t, s, u_C, xi_nu, xi_omega) curve table of a limit run."""
    paths = [Path(records_path), Path(curve_path)]
    for p in paths:
        p.parent.mkdir(parents=True, exist_ok=True)
    trajectory.records.to_csv(paths[0], index=False)
    trajectory.curve_frame().to_csv(paths[1], index=False)
    return paths
