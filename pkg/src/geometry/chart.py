"""
Tube Chart Module

The moving tube chart F(t, s, nu, omega) = Gamma(t, s) + nu n_vec + omega b_vec
and its Jacobian algebra.

With c = d_s Gamma + nu d_s n_vec + omega d_s b_vec the chart gradient has
columns (c, n_vec, b_vec) and the metric is

    G = grad F^T grad F = [[|c|^2, p, q], [p, 1, 0], [q, 0, 1]]
    p = <c, n_vec> = omega <d_s b_vec, n_vec>,  q = <c, b_vec> = nu <d_s n_vec, b_vec>

so that det G = |c|^2 - p^2 - q^2 and

    G^-1 = 1/det G [[1, -p, -q], [-p, |c|^2 - q^2, pq], [-q, pq, |c|^2 - p^2]].

The inner-product forms of p and q are the ones evaluated; they equal the
frame-derivative forms on an exact orthonormal frame and keep G equal to
grad F^T grad F for a discretely propagated one.

J_F = sqrt(det G) carries the sign of <c, t_vec> so folds of the chart show
up as J_F <= 0. All evaluations take a scalar time and broadcast over the
(s, nu, omega) arrays.
"""

import logging
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import ChartValidityError, DegenerateCurveError, DomainError
from .curves import CurveSpec, FrameMode
from .frames import Frame, RotationMinimizingFrame, centered_difference, unit_tangent

# Configure logging
logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_TOL = 1e-12


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


class TubeChart:
    """
    Moving tubular coordinates around a curve.

    Holds the curve, the chart radius eps0 and the frame supply, and exposes
    every Jacobian quantity of the chart plus its inverse map.

    Usage:
        chart = TubeChart(make_arc(), eps0=0.1)
        J = chart.det_J_F(0.0, 0.5, 0.1, 0.0)   # R - nu = 0.2
        coords, inside = chart.invert_chart(0.0, points)
    """

    def __init__(
        self,
        curve: CurveSpec,
        eps0: float,
        fd_step: float = 1e-3,
        seed_points: int = 512,
        frame_nodes: int = 2048,
        validate: bool = True,
        validation_density: Sequence[int] = (33, 5, 12),
    ):
        """
        Initialize the chart.

        Args:
            curve: Moving curve with its frame supply
            eps0: Tube radius, must stay below the curve's reach
            fd_step: Step of the five-point differences, relative to the domain
                length (in s) and to T (in t)
            seed_points: Presampled curve points seeding chart inversion
            frame_nodes: Lattice size of the rotation-minimizing frame
            validate: Check the curve and J_F > 0 on a lattice now
            validation_density: (s, radial, angular) lattice for the J_F check

        Raises:
            ValueError: If eps0 is not positive
            ChartValidityError: If validation finds J_F <= 0
        """
        if eps0 <= 0:
            raise ValueError("eps0 must be positive")
        self.curve = curve
        self.eps0 = float(eps0)
        self.t_final = curve.t_final
        length = max(b[1] - b[0] for b in curve.domain)
        self.ds_step = fd_step * length
        self.dt_step = fd_step * curve.t_final
        self.seed_points = seed_points
        self._seeds: Dict[float, Tuple[np.ndarray, np.ndarray, cKDTree, float]] = {}
        self._one_sided_warned = False

        if curve.frame_mode is FrameMode.ANALYTIC:
            self._rmf = None
        else:
            pad = 0.5 * self.eps0
            self._rmf = RotationMinimizingFrame(
                curve,
                s_min=-self.eps0 - pad,
                s_max=1.0 + self.eps0 + pad,
                n_nodes=frame_nodes,
                fd_step=self.ds_step,
            )

        if validate:
            curve.validate(self.eps0)
            self.check_validity(validation_density)

    def __repr__(self) -> str:
        return f"TubeChart(curve={self.curve.name!r}, eps0={self.eps0})"

    # ------------------------------------------------------------------
    # Domain checks
    # ------------------------------------------------------------------

    def _check_time(self, t: float) -> float:
        t = float(t)
        if t < -_TOL or t > self.t_final + _TOL:
            raise DomainError(f"t={t} outside [0, {self.t_final}]")
        return t

    def _check_s(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < -self.eps0 - _TOL) or np.any(s > 1.0 + self.eps0 + _TOL):
            bad = s[(s < -self.eps0 - _TOL) | (s > 1.0 + self.eps0 + _TOL)].ravel()[0]
            raise DomainError(f"s={bad} outside [{-self.eps0}, {1 + self.eps0}]")
        return s

    def _check_coords(self, t, s, nu, om):
        t = self._check_time(t)
        s = self._check_s(s)
        nu = np.asarray(nu, dtype=float)
        om = np.asarray(om, dtype=float)
        rho = np.hypot(nu, om)
        if np.any(rho > self.eps0 * (1 + 1e-9) + _TOL):
            raise DomainError(f"(nu, omega) outside the disk of radius {self.eps0}: rho={rho.max()}")
        s, nu, om = np.broadcast_arrays(s, nu, om)
        return t, s, nu, om

    # ------------------------------------------------------------------
    # Curve and frame
    # ------------------------------------------------------------------

    def eval_curve(self, t: float, s: ArrayLike) -> np.ndarray:
        """
        Gamma(t, s).

        Raises:
            DomainError: If t is outside [0, T] or s outside [-eps0, 1 + eps0]
        """
        t = self._check_time(t)
        return self.curve(t, self._check_s(s))

    def _frame(self, t: float, s: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._rmf is None:
            t_vec, n_vec, b_vec = self.curve.frame(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
            return t_vec, n_vec, b_vec
        return self._rmf(t, s)

    def _tangent(self, t: float, s: ArrayLike) -> np.ndarray:
        ds, _ = unit_tangent(self.curve, t, s, self.ds_step)
        return ds

    def frame_arrays(self, t: float, s: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Vectorised frame (t_vec, n_vec, b_vec), each (..., 3).

        Raises:
            DegenerateCurveError: If |d_s Gamma| is below tolerance
        """
        t = self._check_time(t)
        s = self._check_s(s)
        speed = np.linalg.norm(self._tangent(t, s), axis=-1)
        if np.any(speed < 1e-10):
            raise DegenerateCurveError(f"|d_s Gamma| = {speed.min():.3e} at t={t}")
        return self._frame(t, s)

    def eval_frame(self, t: float, s: float) -> Frame:
        """Frame at a single (t, s)."""
        t_vec, n_vec, b_vec = self.frame_arrays(t, float(s))
        return Frame(np.asarray(t_vec, dtype=float), np.asarray(n_vec, dtype=float), np.asarray(b_vec, dtype=float))

    def tangent(self, t: float, s: ArrayLike) -> np.ndarray:
        """Five-point centered d_s Gamma, shape (..., 3)."""
        t = self._check_time(t)
        return self._tangent(t, self._check_s(s))

    def speed(self, t: float, s: ArrayLike) -> np.ndarray:
        """|d_s Gamma|."""
        return np.linalg.norm(self.tangent(t, s), axis=-1)

    # ------------------------------------------------------------------
    # Chart map and Jacobians
    # ------------------------------------------------------------------

    def _point(self, t, s, nu, om) -> np.ndarray:
        _, n_vec, b_vec = self._frame(t, s)
        return self.curve(t, s) + np.asarray(nu)[..., None] * n_vec + np.asarray(om)[..., None] * b_vec

    def point(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """F(t, s, nu, omega), shape (..., 3)."""
        t, s, nu, om = self._check_coords(t, s, nu, om)
        return self._point(t, s, nu, om)

    def _parts(self, t, s, nu, om) -> Dict[str, np.ndarray]:
        t_vec, n_vec, b_vec = self._frame(t, s)
        dn, db = centered_difference(lambda x: np.stack(self._frame(t, x)[1:]), s, self.ds_step)
        gs = self._tangent(t, s)
        nu = np.asarray(nu, dtype=float)
        om = np.asarray(om, dtype=float)
        c = gs + nu[..., None] * dn + om[..., None] * db
        return {
            "t_vec": t_vec, "n_vec": n_vec, "b_vec": b_vec,
            "dn": dn, "db": db, "gs": gs, "c": c,
            "c2": _dot(c, c),
            "p": _dot(c, n_vec),
            "q": _dot(c, b_vec),
        }

    def _grad(self, parts: Dict[str, np.ndarray]) -> np.ndarray:
        return np.stack([parts["c"], parts["n_vec"], parts["b_vec"]], axis=-1)

    def _det(self, parts: Dict[str, np.ndarray], strict: bool = True) -> np.ndarray:
        radicand = parts["c2"] - parts["p"] ** 2 - parts["q"] ** 2
        if strict and np.any(radicand < -1e-12 * np.maximum(parts["c2"], 1.0)):
            raise ChartValidityError(f"Negative metric determinant {radicand.min():.3e}; eps0 exceeds the reach")
        sign = np.where(_dot(parts["c"], parts["t_vec"]) < 0, -1.0, 1.0)
        return sign * np.sqrt(np.maximum(radicand, 0.0))

    def _metric_inv(self, parts: Dict[str, np.ndarray], strict: bool = True) -> np.ndarray:
        c2, p, q = parts["c2"], parts["p"], parts["q"]
        det = c2 - p ** 2 - q ** 2
        if strict and np.any(np.abs(det) < 1e-14):
            raise ChartValidityError("Singular chart metric")
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        one = np.ones_like(c2)
        rows = [
            np.stack([one, -p, -q], axis=-1),
            np.stack([-p, c2 - q ** 2, p * q], axis=-1),
            np.stack([-q, p * q, c2 - p ** 2], axis=-1),
        ]
        return np.stack(rows, axis=-2) / det[..., None, None]

    def _inv_grad(self, parts: Dict[str, np.ndarray], strict: bool = True) -> np.ndarray:
        return self._metric_inv(parts, strict) @ np.swapaxes(self._grad(parts), -1, -2)

    def grad_F(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """
        Chart gradient with columns (d_s Gamma + nu d_s n + omega d_s b, n_vec, b_vec).

        Returns:
            Array of shape (..., 3, 3)
        """
        t, s, nu, om = self._check_coords(t, s, nu, om)
        return self._grad(self._parts(t, s, nu, om))

    def det_J_F(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """
        J_F = det grad F from the closed form sign(<c, t_vec>) sqrt(|c|^2 - p^2 - q^2).

        Raises:
            ChartValidityError: On a negative radicand
        """
        t, s, nu, om = self._check_coords(t, s, nu, om)
        return self._det(self._parts(t, s, nu, om))

    def metric(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """grad F^T grad F, shape (..., 3, 3)."""
        g = self.grad_F(t, s, nu, om)
        return np.swapaxes(g, -1, -2) @ g

    def metric_inv(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """
        Closed-form (grad F^T grad F)^-1.

        Raises:
            ChartValidityError: If the metric is singular
        """
        t, s, nu, om = self._check_coords(t, s, nu, om)
        return self._metric_inv(self._parts(t, s, nu, om))

    def inv_grad_F(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """grad F^-1 = (grad F^T grad F)^-1 grad F^T."""
        t, s, nu, om = self._check_coords(t, s, nu, om)
        parts = self._parts(t, s, nu, om)
        if np.any(self._det(parts) <= 0):
            raise ChartValidityError("J_F <= 0; grad F is not invertible here")
        return self._inv_grad(parts)

    # ------------------------------------------------------------------
    # Time derivatives
    # ------------------------------------------------------------------

    def _velocity(self, t: float, s, nu, om) -> Tuple[np.ndarray, str]:
        shape = np.broadcast_shapes(np.shape(s), np.shape(nu), np.shape(om)) + (3,)
        if self.curve.static:
            return np.zeros(shape), "static"
        h = self.dt_step
        if t - 2 * h < 0.0:
            f = [self._point(t + k * h, s, nu, om) for k in range(5)]
            return (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h), "forward"
        if t + 2 * h > self.t_final:
            f = [self._point(t - k * h, s, nu, om) for k in range(5)]
            return (25 * f[0] - 48 * f[1] + 36 * f[2] - 16 * f[3] + 3 * f[4]) / (12 * h), "backward"
        return centered_difference(lambda x: self._point(float(x), s, nu, om), t, h), "centered"

    def curve_velocity(
        self,
        t: float,
        s: ArrayLike,
        nu: ArrayLike = 0.0,
        om: ArrayLike = 0.0,
        with_metadata: bool = False,
    ) -> Union[np.ndarray, Tuple[np.ndarray, Dict[str, Any]]]:
        """
        Eulerian velocity w o F = d_t F by time finite differences.

        Five-point stencils: centered in the interior, fourth-order one-sided
        within two steps of t = 0 and t = T. The stencil is reported when
        with_metadata is set.
        """
        t, s, nu, om = self._check_coords(t, s, nu, om)
        vel, stencil = self._velocity(t, s, nu, om)
        if stencil in ("forward", "backward") and not self._one_sided_warned:
            logger.warning(f"One-sided time difference used at t={t} ({stencil})")
            self._one_sided_warned = True
        if with_metadata:
            return vel, {"stencil": stencil, "step": self.dt_step}
        return vel

    def D_F(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """Space-time Jacobian of (t, s, nu, omega) -> (t, F), shape (..., 4, 4)."""
        t, s, nu, om = self._check_coords(t, s, nu, om)
        grad = self._grad(self._parts(t, s, nu, om))
        vel, _ = self._velocity(t, s, nu, om)
        out = np.zeros(grad.shape[:-2] + (4, 4))
        out[..., 0, 0] = 1.0
        out[..., 1:, 0] = vel
        out[..., 1:, 1:] = grad
        return out

    def D_F_inv(self, t: float, s: ArrayLike, nu: ArrayLike, om: ArrayLike) -> np.ndarray:
        """Block inverse (1, 0; -grad F^-1 d_t F, grad F^-1), shape (..., 4, 4)."""
        t, s, nu, om = self._check_coords(t, s, nu, om)
        inv = self._inv_grad(self._parts(t, s, nu, om))
        vel, _ = self._velocity(t, s, nu, om)
        out = np.zeros(inv.shape[:-2] + (4, 4))
        out[..., 0, 0] = 1.0
        out[..., 1:, 0] = -np.einsum("...ij,...j->...i", inv, vel)
        out[..., 1:, 1:] = inv
        return out

    # ------------------------------------------------------------------
    # Chart inversion
    # ------------------------------------------------------------------

    def _seed_tree(self, t: float) -> Tuple[np.ndarray, np.ndarray, cKDTree, float]:
        key = float(t)
        if key not in self._seeds:
            s_seed = np.linspace(-self.eps0, 1.0 + self.eps0, self.seed_points)
            pts = self.curve(key, s_seed)
            spacing = float(np.linalg.norm(np.diff(pts, axis=0), axis=-1).max())
            if len(self._seeds) > 32:
                self._seeds.pop(next(iter(self._seeds)))
            self._seeds[key] = (s_seed, pts, cKDTree(pts), spacing)
        return self._seeds[key]

    def invert_chart(
        self,
        t: float,
        x: np.ndarray,
        tol: float = 1e-12,
        max_iter: int = 50,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Solve F(t, s, nu, omega) = x by Newton iteration.

        Iterations start from the nearest of the presampled curve points and
        are vectorised over all query points.

        Args:
            t: Time
            x: Points, shape (..., 3)
            tol: Residual |F - x| accepted as converged
            max_iter: Newton iteration cap

        Returns:
            (coords, inside): coords has shape (..., 3) holding (s, nu, omega)
            and NaN rows for points outside N_eps0(t); inside is the boolean mask

        Raises:
            ChartValidityError: If Newton fails for a point inside the tube
        """
        t = self._check_time(t)
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, 3)
        n = len(pts)
        coords = np.full((n, 3), np.nan)
        inside = np.zeros(n, dtype=bool)
        if n == 0:
            return coords.reshape(shape + (3,)), inside.reshape(shape)

        s_seed, _, tree, spacing = self._seed_tree(t)
        dist, k = tree.query(pts)
        cand = np.flatnonzero(dist <= self.eps0 + spacing)
        if len(cand) == 0:
            return coords.reshape(shape + (3,)), inside.reshape(shape)

        xc = pts[cand]
        s = s_seed[k[cand]]
        t_vec, n_vec, b_vec = self._frame(t, s)
        d = xc - self.curve(t, s)
        s = s + _dot(d, t_vec) / np.linalg.norm(self._tangent(t, s), axis=-1)
        s = np.clip(s, -2 * self.eps0, 1 + 2 * self.eps0)
        nu = _dot(d, n_vec)
        om = _dot(d, b_vec)

        scale = 1.0 + np.abs(xc).max(axis=-1)
        active = np.ones(len(cand), dtype=bool)
        converged = np.zeros(len(cand), dtype=bool)
        escaped = np.zeros(len(cand), dtype=bool)

        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if len(idx) == 0:
                break
            r = self._point(t, s[idx], nu[idx], om[idx]) - xc[idx]
            res = np.linalg.norm(r, axis=-1)
            done = res < tol * scale[idx]
            converged[idx[done]] = True
            active[idx[done]] = False

            idx, r = idx[~done], r[~done]
            if len(idx) == 0:
                break
            parts = self._parts(t, s[idx], nu[idx], om[idx])
            step = np.einsum("...ij,...j->...i", self._inv_grad(parts, strict=False), r)
            s[idx] -= step[:, 0]
            nu[idx] -= step[:, 1]
            om[idx] -= step[:, 2]

            out = (
                ~np.isfinite(s[idx]) | (s[idx] < -2 * self.eps0) | (s[idx] > 1 + 2 * self.eps0)
                | (np.hypot(nu[idx], om[idx]) > 2 * self.eps0)
            )
            escaped[idx[out]] = True
            active[idx[out]] = False

        # One last residual check for points that hit the iteration cap
        idx = np.flatnonzero(active)
        if len(idx):
            res = np.linalg.norm(self._point(t, s[idx], nu[idx], om[idx]) - xc[idx], axis=-1)
            ok = res < max(tol, 1e-10) * scale[idx]
            converged[idx[ok]] = True
            active[idx[ok]] = False

        rho = np.hypot(nu, om)
        in_tube = (
            converged & (s >= -self.eps0 - _TOL) & (s <= 1 + self.eps0 + _TOL)
            & (rho <= self.eps0 * (1 + 1e-12))
        )
        failed = active & (s >= -self.eps0) & (s <= 1 + self.eps0) & (rho < self.eps0)
        if np.any(failed):
            j = np.flatnonzero(failed)[0]
            raise ChartValidityError(
                f"Chart inversion did not converge at x={xc[j].tolist()} (t={t})",
                witness=xc[j],
            )

        sel = cand[in_tube]
        coords[sel] = np.column_stack([s[in_tube], nu[in_tube], om[in_tube]])
        inside[sel] = True
        return coords.reshape(shape + (3,)), inside.reshape(shape)

    # ------------------------------------------------------------------
    # Validity, coercivity and divergence
    # ------------------------------------------------------------------

    def lattice(self, density: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(s, nu, omega) lattice over [-eps0, 1 + eps0] x D_eps0, flattened."""
        n_s, n_r, n_th = density
        s = np.linspace(-self.eps0, 1.0 + self.eps0, n_s)
        rho = np.linspace(0.0, self.eps0, n_r)
        th = np.linspace(0.0, 2 * np.pi, n_th, endpoint=False)
        S, R, TH = np.meshgrid(s, rho, th, indexing="ij")
        return S.ravel(), (R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()

    def check_times(self, n_times: int = 5) -> np.ndarray:
        """Sample times used by lattice checks (one for a static curve)."""
        if self.curve.static:
            return np.array([0.0])
        return np.linspace(0.0, self.t_final, n_times)

    def check_validity(self, density: Sequence[int] = (33, 5, 12), n_times: int = 5) -> float:
        """
        Check J_F > 0 on a lattice.

        Returns:
            Minimum J_F found

        Raises:
            ChartValidityError: With the first point where J_F <= 0
        """
        s, nu, om = self.lattice(density)
        j_min = np.inf
        for t in self.check_times(n_times):
            J = self._det(self._parts(float(t), s, nu, om), strict=False)
            bad = np.flatnonzero(J <= 0)
            if len(bad):
                i = bad[0]
                witness = (float(t), float(s[i]), float(nu[i]), float(om[i]))
                raise ChartValidityError(
                    f"J_F = {J[i]:.4g} <= 0 at (t, s, nu, omega) = {witness}; eps0={self.eps0} exceeds the reach",
                    witness=witness,
                )
            j_min = min(j_min, float(J.min()))
        logger.debug(f"Chart '{self.curve.name}' valid, min J_F = {j_min:.6g}")
        return j_min

    def coercivity_beta(self, sample_density: Sequence[int] = (33, 5, 12), n_times: int = 5) -> float:
        """
        Smallest eigenvalue of (grad F^T grad F)^-1 J_F over a lattice.

        Raises:
            ChartValidityError: If the minimum is not positive
        """
        s, nu, om = self.lattice(sample_density)
        beta = np.inf
        for t in self.check_times(n_times):
            parts = self._parts(float(t), s, nu, om)
            M = self._metric_inv(parts, strict=False) * self._det(parts, strict=False)[..., None, None]
            M = 0.5 * (M + np.swapaxes(M, -1, -2))
            beta = min(beta, float(np.linalg.eigvalsh(M)[..., 0].min()))
        if not beta > 0:
            raise ChartValidityError(f"Coercivity constant beta = {beta:.4g} is not positive")
        return beta

    def divergence_in_tube(
        self,
        q: Callable[[np.ndarray], np.ndarray],
        t: float,
        s: ArrayLike,
        nu: ArrayLike,
        om: ArrayLike,
        step: float = 1e-3,
    ) -> np.ndarray:
        """
        Ambient divergence of q computed in tube coordinates.

        Evaluates (1 / J_F) div_(s, nu, omega) [J_F grad F^-1 (q o F)] by
        centered differences of width step.
        """
        t, s, nu, om = self._check_coords(t, s, nu, om)

        def flux(ss, nn, oo):
            parts = self._parts(t, ss, nn, oo)
            J = self._det(parts, strict=False)
            qx = q(self._point(t, ss, nn, oo))
            return J[..., None] * np.einsum("...ij,...j->...i", self._inv_grad(parts, strict=False), qx)

        coords = [s, nu, om]
        div = np.zeros(s.shape)
        for k in range(3):
            plus = [c + step if i == k else c for i, c in enumerate(coords)]
            minus = [c - step if i == k else c for i, c in enumerate(coords)]
            div += (flux(*plus)[..., k] - flux(*minus)[..., k]) / (2 * step)
        return div / self._det(self._parts(t, s, nu, om))
