"""
Concentrated-Capacity Coefficient Fields

Distance to the core C_eps = [0, 1] x D_eps in chart coordinates, the hat
cutoff chi_delta, the decay function zeta = chi_delta o d_eps and the
coefficients

    a = 1 + (eps0^2/eps^2 - 1) zeta
    K = k0 I + ((eps0^2/eps^2) Kc - k0 I) zeta,   Kc = R diag(k_s, k_n, k_n) R^T
    v = v + ((eps0^2/eps^2) v_C - v) zeta

with R = (t_vec, n_vec, b_vec). Functions taking an ambient point x pull it
back through the chart first; zeta is extended by zero outside N_eps0(t).
The *_coords variants work directly on (s, nu, omega) arrays and are what
the quadrature layer uses.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ..geometry.chart import TubeChart
from .params import CapacityParams, MaterialParams

# Configure logging
logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Distance and cutoff
# ---------------------------------------------------------------------------

def dist_core(p: CapacityParams, s, nu, om) -> np.ndarray:
    """
    d_eps = sqrt(s_-^2 + (s - 1)_+^2 + (rho - eps)_+^2), rho = sqrt(nu^2 + omega^2).

    Zero exactly on C_eps.
    """
    s = np.asarray(s, dtype=float)
    rho = np.hypot(nu, om)
    s_minus = np.maximum(-s, 0.0)
    s_plus = np.maximum(s - 1.0, 0.0)
    r_plus = np.maximum(rho - p.eps, 0.0)
    return np.sqrt(s_minus ** 2 + s_plus ** 2 + r_plus ** 2)


def dist_core_grad(p: CapacityParams, s, nu, om) -> np.ndarray:
    """
    Gradient of d_eps in (s, nu, omega), shape (..., 3); zero on the core.
    """
    s, nu, om = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(nu, dtype=float), np.asarray(om, dtype=float))
    d = dist_core(p, s, nu, om)
    rho = np.hypot(nu, om)
    r_plus = np.maximum(rho - p.eps, 0.0)
    safe_rho = np.where(rho > 0, rho, 1.0)
    g = np.stack(
        [
            -np.maximum(-s, 0.0) + np.maximum(s - 1.0, 0.0),
            r_plus * nu / safe_rho,
            r_plus * om / safe_rho,
        ],
        axis=-1,
    )
    safe_d = np.where(d > 0, d, 1.0)[..., None]
    return np.where(d[..., None] > 0, g / safe_d, 0.0)


def dist_core_reference(p: CapacityParams, points: np.ndarray, coarse: Tuple[int, int, int] = (41, 6, 16)) -> np.ndarray:
    """
    Brute-force distance from chart points to C_eps.

    A nearest-point search over a discretised C_eps is polished by a
    constrained SLSQP solve (C_eps is convex, so the polish finds the
    projection).

    Args:
        p: Capacity parameters (eps used)
        points: (n, 3) array of (s, nu, omega)
        coarse: (axial, radial, angular) resolution of the discretisation

    Returns:
        (n,) distances
    """
    n_s, n_r, n_th = coarse
    s = np.linspace(0.0, 1.0, n_s)
    rho = np.linspace(0.0, p.eps, n_r)
    th = np.linspace(0.0, 2 * np.pi, n_th, endpoint=False)
    S, R, TH = np.meshgrid(s, rho, th, indexing="ij")
    cloud = np.column_stack([S.ravel(), (R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    _, nearest = cKDTree(cloud).query(points)

    eps2 = p.eps ** 2
    constraint = {
        "type": "ineq",
        "fun": lambda y: eps2 - y[1] ** 2 - y[2] ** 2,
        "jac": lambda y: np.array([0.0, -2 * y[1], -2 * y[2]]),
    }
    out = np.empty(len(points))
    for i, x in enumerate(np.asarray(points, dtype=float)):
        res = minimize(
            lambda y: 0.5 * np.sum((y - x) ** 2),
            cloud[nearest[i]],
            jac=lambda y: y - x,
            method="SLSQP",
            bounds=[(0.0, 1.0), (-p.eps, p.eps), (-p.eps, p.eps)],
            constraints=[constraint],
            options={"ftol": 1e-16, "maxiter": 200},
        )
        out[i] = np.linalg.norm(res.x - x)
    return out


def cutoff_chi(delta: float, r) -> np.ndarray:
    """Hat cutoff chi_delta(r) = (1 - r / delta)_+."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return np.maximum(1.0 - np.asarray(r, dtype=float) / delta, 0.0)


def zeta_coords(p: CapacityParams, s, nu, om) -> np.ndarray:
    """zeta o F = chi_delta o d_eps at chart coordinates."""
    return cutoff_chi(p.delta, dist_core(p, s, nu, om))


def capacity_from_zeta(p: CapacityParams, zeta_values) -> np.ndarray:
    return 1.0 + (p.contrast - 1.0) * np.asarray(zeta_values, dtype=float)


# ---------------------------------------------------------------------------
# Ambient-point evaluation
# ---------------------------------------------------------------------------

def _pull_back(chart: TubeChart, t: float, x) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    coords, inside = chart.invert_chart(t, x)
    return coords, inside


def zeta(chart: TubeChart, p: CapacityParams, t: float, x) -> np.ndarray:
    """
    zeta_(eps, delta)(t; x), zero outside N_eps0(t).

    Raises:
        ChartValidityError: If chart inversion fails inside the tube
    """
    coords, inside = _pull_back(chart, t, x)
    out = np.zeros(inside.shape)
    if np.any(inside):
        c = coords[inside]
        out[inside] = zeta_coords(p, c[:, 0], c[:, 1], c[:, 2])
    return out


def capacity_a(chart: TubeChart, p: CapacityParams, t: float, x) -> np.ndarray:
    """a_(eps, delta)(t; x) = 1 + (eps0^2/eps^2 - 1) zeta."""
    return capacity_from_zeta(p, zeta(chart, p, t, x))


def curve_tensor(chart: TubeChart, m: MaterialParams, t: float, s, nu, om) -> np.ndarray:
    """
    Kc = R diag(k_s, k_n, k_n) R^T with the frame at (t, s).

    The frame does not depend on (nu, omega). Shape (..., 3, 3).
    """
    s, nu, om = np.broadcast_arrays(np.asarray(s, dtype=float), nu, om)
    t_vec, n_vec, b_vec = chart.frame_arrays(t, s)
    R = np.stack([t_vec, n_vec, b_vec], axis=-1)
    ks = m.k_s(s, nu, om)
    kn = m.k_n(s, nu, om)
    D = np.stack([ks, kn, kn], axis=-1)
    return np.einsum("...ik,...k,...jk->...ij", R, D, R)


def diffusivity_from_zeta(p: CapacityParams, k0: float, Kc: np.ndarray, zeta_values) -> np.ndarray:
    z = np.asarray(zeta_values, dtype=float)[..., None, None]
    return k0 * np.eye(3) + (p.contrast * Kc - k0 * np.eye(3)) * z


def advection_from_zeta(p: CapacityParams, v: np.ndarray, v_C: np.ndarray, zeta_values) -> np.ndarray:
    z = np.asarray(zeta_values, dtype=float)[..., None]
    return v + (p.contrast * v_C - v) * z


def diffusivity_K(chart: TubeChart, p: CapacityParams, m: MaterialParams, t: float, x) -> np.ndarray:
    """
    K_(eps, delta)(t; x), shape (..., 3, 3).

    Satisfies q^T K q >= theta a |q|^2 whenever theta is a valid floor.
    """
    coords, inside = _pull_back(chart, t, x)
    out = np.broadcast_to(m.k0 * np.eye(3), inside.shape + (3, 3)).copy()
    if np.any(inside):
        c = coords[inside]
        z = zeta_coords(p, c[:, 0], c[:, 1], c[:, 2])
        Kc = curve_tensor(chart, m, t, c[:, 0], c[:, 1], c[:, 2])
        out[inside] = diffusivity_from_zeta(p, m.k0, Kc, z)
    return out


def advection_v(chart: TubeChart, p: CapacityParams, m: MaterialParams, t: float, x) -> np.ndarray:
    """v_(eps, delta)(t; x), shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    z = zeta(chart, p, t, x)
    return advection_from_zeta(p, m.v(t, x), m.v_C(t, x), z)


def dt_capacity_coords(chart: TubeChart, p: CapacityParams, t: float, s, nu, om) -> np.ndarray:
    """
    d_t a_(eps, delta) at fixed ambient point, written at chart coordinates.

    (1/delta)(eps0^2/eps^2 - 1) grad d_eps^T grad F^-1 d_t F on the open
    collar 0 < d_eps < delta and zero elsewhere.
    """
    s, nu, om = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(nu, dtype=float), np.asarray(om, dtype=float))
    out = np.zeros(s.shape)
    d = dist_core(p, s, nu, om)
    collar = (d > 0) & (d < p.delta)
    if chart.curve.static or not np.any(collar):
        return out
    sc, nc, oc = s[collar], nu[collar], om[collar]
    inv = chart.inv_grad_F(t, sc, nc, oc)
    vel = chart.curve_velocity(t, sc, nc, oc)
    grad_d = dist_core_grad(p, sc, nc, oc)
    rate = np.einsum("...i,...ij,...j->...", grad_d, inv, vel)
    out[collar] = (p.contrast - 1.0) / p.delta * rate
    return out


def dt_capacity_a(chart: TubeChart, p: CapacityParams, t: float, x) -> np.ndarray:
    """d_t a_(eps, delta)(t; x) for diagnostics; zero outside the open collar."""
    coords, inside = _pull_back(chart, t, x)
    out = np.zeros(inside.shape)
    if np.any(inside):
        c = coords[inside]
        out[inside] = dt_capacity_coords(chart, p, t, c[:, 0], c[:, 1], c[:, 2])
    return out


def advection_bound(m: MaterialParams, t: float, x: np.ndarray) -> float:
    """max over sample points of max(|v|, |v_C|), the sup-norm of the pair <v, v_C>."""
    x = np.asarray(x, dtype=float)
    return float(max(np.linalg.norm(m.v(t, x), axis=-1).max(), np.linalg.norm(m.v_C(t, x), axis=-1).max()))
