"""
Configuration settings for the concentrated-capacity lab.

This module contains the default parameters for the tube geometry, the
capacity and material data, quadrature densities, both solvers and the
verification ladders. A run configuration file only needs to list the keys
it changes; everything else is taken from here.
"""

from typing import Dict, Any

# Curve, chart and computational domain
GEOMETRY_CONFIG: Dict[str, Any] = {
    # Built-in curve name: segment, translating-segment, arc, rotating-arc,
    # helix-wiggle, or "polyline" to read curve_file
    "curve": "segment",

    # Sampled polyline file with whitespace-separated "t s x y z" rows
    "curve_file": "",

    # Extra keyword arguments for the built-in curve (origin, radius, ...)
    "curve_params": {},

    # Tube radius eps0 of the chart; must stay below the curve's reach
    "eps0": 0.1,

    # Final time T of the curve motion
    "t_final": 1.0,

    # Axis-aligned box Omega as [[x0, x1], [y0, y1], [z0, z1]]
    "domain": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],

    # Grid resolution (n_x, n_y, n_z)
    "resolution": [32, 32, 32],

    # Step of the five-point differences for frame and time derivatives, relative to
    # the domain length
    "fd_step": 1.0e-3,

    # Presampled curve points seeding chart inversion
    "seed_points": 512,

    # Nodes of the rotation-minimizing frame along s
    "frame_nodes": 2048,

    # J_F positivity lattice checked at chart construction (s, radial, angular)
    "validation_density": [33, 5, 12],
}

# Concentrated-capacity parameters (eps0 comes from GEOMETRY_CONFIG)
CAPACITY_CONFIG: Dict[str, Any] = {
    # Core radius eps, 0 < eps < eps0
    "eps": 0.05,

    # Collar width delta, 0 < delta < eps0 - eps; used by the explicit rule
    "delta": 0.01,

    # Constant C in delta = C * eps^k for the eps3 / eps11 rules
    "delta_constant": 1.0,
}

# Diffusivities, velocities and initial data
MATERIAL_CONFIG: Dict[str, Any] = {
    # Isotropic bulk diffusivity
    "k0": 1.0,

    # Diffusivity floor theta, 0 < theta <= min(k0, inf k_s, inf k_n)
    "theta": 0.5,

    # Principal diffusivity along the curve
    "k_s": {"kind": "constant", "value": 2.0},

    # Principal diffusivity across the curve
    "k_n": {"kind": "constant", "value": 1.0},

    # Bulk advection field v(t, x)
    "v": {"kind": "constant", "value": [0.0, 0.0, 0.0]},

    # Advection field inside the tube v_C(t, x)
    "v_C": {"kind": "constant", "value": [0.0, 0.0, 0.0]},

    # Initial datum u0(x)
    "u0": {"kind": "bump", "amplitude": 1.0, "center": [0.5, 0.5, 0.5], "width": 0.15, "base": 0.0},
}

# Tube-coordinate quadrature densities
QUADRATURE_CONFIG: Dict[str, Any] = {
    # Gauss-Legendre nodes across the core disk radius
    "n_radial": 16,

    # Uniform angular nodes around the disk
    "n_angular": 32,

    # Axial nodes per curve-mesh node (axial count = axial_per_node * n_s)
    "axial_per_node": 4,

    # Gauss-Legendre nodes across the collar width delta (at least 8)
    "n_collar": 8,

    # Minimum tube nodes per grid spacing when depositing into cells
    "nodes_per_cell": 3,
}

# Time stepping and the linear solver
SOLVER_CONFIG: Dict[str, Any] = {
    # Backward-Euler time step
    "dt": 0.0025,

    # Final time of a run; must not exceed the unknown existence time h
    "t_end": 0.05,

    # Relative residual tolerance of BiCGStab, in (0, 1e-4]
    "tolerance": 1.0e-12,

    # BiCGStab iteration cap per step
    "max_iterations": 2000,

    # Coupling of delta to eps: eps3, eps11 or explicit
    "delta_rule": "eps3",

    # Keep every n-th step in the trajectory
    "snapshot_every": 1,

    # Write VTK snapshots for solve-approx / solve-limit
    "write_vtk": False,
}

# Coupled limit solver
LIMIT_CONFIG: Dict[str, Any] = {
    # Nodes of the 1D curve mesh on [0, 1]
    "n_s": 64,

    # Exchange averaging radius in grid cells
    "r_avg_cells": 2.0,

    # Exchange coefficient lambda_ex; 0 selects k0 / r_avg^2
    "lambda_ex": 0.0,
}

# eps-ladders
LADDER_CONFIG: Dict[str, Any] = {
    # Number of rungs eps_i = eps0 / 2^i
    "n_rungs": 3,

    # Rungs used with --deep
    "deep_rungs": 4,

    # First rung index i
    "first_rung": 1,

    # Grid resolution of the first rung; doubled per rung
    "base_resolution": 24,

    # Resolution cap for regular and --deep ladders
    "max_resolution": 96,
    "deep_max_resolution": 160,
}

# Verification harness
HARNESS_CONFIG: Dict[str, Any] = {
    # Seed for every random sample the harness draws
    "seed": 42,

    # Random chart points for the geometry identity suite
    "geometry_samples": 1000,

    # Random points for the distance / cutoff suite
    "distance_samples": 10000,

    # Monte Carlo samples for the gap-measure oracle
    "monte_carlo_samples": 10_000_000,

    # Reference collar widths for gap-measure linearity (halving sequence)
    "gap_deltas": [0.01, 0.005, 0.0025, 0.00125],

    # Test function for the capacity ladder: const, linear, bump
    "f": "const",

    # A rung whose normalized energy exceeds this multiple of the first rung
    # counts as blow-up
    "energy_blowup_factor": 3.0,

    # Minimum reduction of the weak residual per refinement
    "residual_factor": 1.5,

    # Grid resolutions for the weak-residual refinement study
    "refinement": [32, 64],
}

# Outputs
OUTPUT_CONFIG: Dict[str, Any] = {
    # Directory receiving report.txt, report.csv and resolved-config.toml
    "directory": "results",

    # Root logging level
    "log_level": "INFO",

    # Save convergence plots next to ladder reports
    "write_plots": True,
}
