"""
Curve Library Module

Moving curves Gamma(t, s) on s in [-eps0, 1 + eps0] together with their
frame supply. Every curve is a vectorised closure: arrays t and s broadcast
against each other and the result carries a trailing axis of length 3.

Built-in curves:
- segment: static straight segment
- translating-segment: straight segment moving with constant velocity
- arc: static circular arc with analytic frame
- rotating-arc: circular arc spinning about its center
- helix-wiggle: helix with a small time-periodic twist (rotation-minimizing frame)
- polyline: sampled "t s x y z" rows interpolated by cubic splines
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline, RectBivariateSpline

from ..exceptions import DegenerateCurveError, DomainError

# Configure logging
logger = logging.getLogger(__name__)

CurveFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
FrameFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]

UNIT_CUBE: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


class FrameMode(Enum):
    """How the normal/binormal pair along the curve is supplied."""
    ANALYTIC = "analytic-frame"
    ROTATION_MINIMIZING = "rotation-minimizing"


@dataclass(frozen=True)
class CurveSpec:
    """
    Description of a moving curve and its frame.

    Attributes:
        name: Curve name (built-in key or file name)
        gamma: Vectorised map (t, s) -> point, shape (..., 3)
        frame_mode: Analytic frame or rotation-minimizing fallback
        frame: Analytic closure (t, s) -> (t_vec, n_vec, b_vec), analytic mode only
        gamma_t: Analytic time derivative of gamma, used as an oracle when known
        t_final: Final time T
        domain: Axis-aligned box Omega the curve must stay inside
        s_range: Interval of s on which gamma is defined
        static: True when gamma does not depend on t
        params: Parameters the curve was built with
    """
    name: str
    gamma: CurveFn
    frame_mode: FrameMode = FrameMode.ROTATION_MINIMIZING
    frame: Optional[FrameFn] = None
    gamma_t: Optional[CurveFn] = None
    t_final: float = 1.0
    domain: Tuple[Tuple[float, float], ...] = UNIT_CUBE
    s_range: Tuple[float, float] = (-np.inf, np.inf)
    static: bool = False
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_mode is FrameMode.ANALYTIC and self.frame is None:
            raise ValueError(f"Curve '{self.name}' is in analytic-frame mode but has no frame closure")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")

    def __call__(self, t, s) -> np.ndarray:
        return self.gamma(np.asarray(t, dtype=float), np.asarray(s, dtype=float))

    def validate(
        self,
        eps0: float,
        n_s: int = 129,
        n_t: int = 9,
        fd_step: float = 1e-4,
    ) -> bool:
        """
        Check containment, regularity and smoothness on a sample lattice.

        Containment is checked for the physical range s in [0, 1] on the
        closed box; smoothness by requiring that second differences in s and
        first differences in t stay bounded when the sample step is halved.

        Raises:
            DomainError: If the sampled image leaves Omega or s_range misses
                [-eps0, 1 + eps0]
            DegenerateCurveError: If |d_s Gamma| vanishes or the differences blow up
        """
        if self.s_range[0] > -eps0 + 1e-12 or self.s_range[1] < 1.0 + eps0 - 1e-12:
            raise DomainError(
                f"Curve '{self.name}' is defined on s in {self.s_range}, "
                f"which does not cover [-{eps0}, {1 + eps0}]"
            )

        t = np.linspace(0.0, self.t_final, n_t)[:, None]
        s = np.linspace(0.0, 1.0, n_s)[None, :]
        pts = self(t, s)
        lo = np.array([b[0] for b in self.domain])
        hi = np.array([b[1] for b in self.domain])
        outside = np.any((pts < lo - 1e-12) | (pts > hi + 1e-12), axis=-1)
        if np.any(outside):
            i, j = np.argwhere(outside)[0]
            raise DomainError(
                f"Curve '{self.name}' leaves the domain at t={t[i, 0]:.4g}, s={s[0, j]:.4g}: {pts[i, j]}"
            )

        s_ext = np.linspace(-eps0, 1.0 + eps0, n_s)[None, :]
        speed = np.linalg.norm(self(t, s_ext + fd_step) - self(t, s_ext - fd_step), axis=-1) / (2 * fd_step)
        if speed.min() < 1e-8:
            raise DegenerateCurveError(f"Curve '{self.name}' has vanishing speed |d_s Gamma| = {speed.min():.3e}")

        second = []
        for h in (fd_step, fd_step / 2):
            d2 = self(t, s_ext + h) - 2 * self(t, s_ext) + self(t, s_ext - h)
            second.append(np.abs(d2).max() / h ** 2)
        if second[1] > 4.0 * second[0] + 1e-6:
            raise DegenerateCurveError(f"Curve '{self.name}' is not C^2 in s (second differences grow)")

        if not self.static:
            first = []
            for h in (fd_step, fd_step / 2):
                tp = np.clip(t + h, 0.0, self.t_final)
                tm = np.clip(t - h, 0.0, self.t_final)
                d1 = (self(tp, s_ext) - self(tm, s_ext)) / np.maximum(tp - tm, 1e-300)[..., None]
                first.append(np.abs(d1).max())
            if first[1] > 4.0 * first[0] + 1e-6:
                raise DegenerateCurveError(f"Curve '{self.name}' is not C^1 in t")
        return True


def _vec(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"Expected a 3-vector, got {values}")
    return arr


def _perpendicular(direction: np.ndarray) -> np.ndarray:
    """Unit vector perpendicular to direction, taken from the least aligned axis."""
    axis = np.eye(3)[np.argmin(np.abs(direction))]
    n = axis - np.dot(axis, direction) * direction
    return n / np.linalg.norm(n)


def make_segment(
    origin: Sequence[float] = (0.0, 0.5, 0.5),
    direction: Sequence[float] = (1.0, 0.0, 0.0),
    length: float = 1.0,
    velocity: Sequence[float] = (0.0, 0.0, 0.0),
    t_final: float = 1.0,
    domain=UNIT_CUBE,
    name: Optional[str] = None,
) -> CurveSpec:
    """
    Straight segment Gamma(t, s) = origin + s * length * e + t * velocity.

    The frame is constant: t_vec = e and n_vec from the least aligned axis.
    """
    origin = _vec(origin)
    e = _vec(direction)
    e = e / np.linalg.norm(e)
    vel = _vec(velocity)
    n = _perpendicular(e)
    b = np.cross(e, n)
    static = bool(np.all(vel == 0))

    def gamma(t, s):
        t, s = np.broadcast_arrays(t, s)
        return origin + (s * length)[..., None] * e + t[..., None] * vel

    def gamma_t(t, s):
        t, s = np.broadcast_arrays(t, s)
        return np.broadcast_to(vel, t.shape + (3,)).copy()

    def frame(t, s):
        shape = np.broadcast_shapes(np.shape(t), np.shape(s)) + (3,)
        return (np.broadcast_to(e, shape).copy(), np.broadcast_to(n, shape).copy(), np.broadcast_to(b, shape).copy())

    return CurveSpec(
        name=name or ("segment" if static else "translating-segment"),
        gamma=gamma,
        frame_mode=FrameMode.ANALYTIC,
        frame=frame,
        gamma_t=gamma_t,
        t_final=t_final,
        domain=tuple(tuple(b) for b in domain),
        static=static,
        params={"origin": origin.tolist(), "direction": e.tolist(), "length": length, "velocity": vel.tolist()},
    )


def make_translating_segment(
    origin: Sequence[float] = (0.0, 0.4, 0.5),
    speed: float = 0.2,
    direction: Sequence[float] = (1.0, 0.0, 0.0),
    motion: Sequence[float] = (0.0, 1.0, 0.0),
    length: float = 1.0,
    t_final: float = 1.0,
    domain=UNIT_CUBE,
) -> CurveSpec:
    """Segment Gamma(t, s) = origin + s * length * e + c * t * motion."""
    m = _vec(motion)
    m = m / np.linalg.norm(m)
    return make_segment(origin, direction, length, speed * m, t_final, domain, name="translating-segment")


def make_arc(
    center: Sequence[float] = (0.5, 0.5, 0.5),
    radius: float = 0.3,
    angular_speed: float = 0.0,
    t_final: float = 1.0,
    domain=UNIT_CUBE,
) -> CurveSpec:
    """
    Circular arc Gamma(t, s) = c + R (cos(s + W t), sin(s + W t), 0).

    Analytic frame t_vec = (-sin, cos, 0), n_vec = -(cos, sin, 0),
    b_vec = (0, 0, 1); on it J_F = R - nu.
    """
    c = _vec(center)
    R = float(radius)
    W = float(angular_speed)
    if R <= 0:
        raise ValueError("Arc radius must be positive")

    def _angle(t, s):
        t, s = np.broadcast_arrays(t, s)
        return s + W * t

    def gamma(t, s):
        th = _angle(t, s)
        return c + R * np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)

    def gamma_t(t, s):
        th = _angle(t, s)
        return R * W * np.stack([-np.sin(th), np.cos(th), np.zeros_like(th)], axis=-1)

    def frame(t, s):
        th = _angle(t, s)
        zero, one = np.zeros_like(th), np.ones_like(th)
        t_vec = np.stack([-np.sin(th), np.cos(th), zero], axis=-1)
        n_vec = -np.stack([np.cos(th), np.sin(th), zero], axis=-1)
        b_vec = np.stack([zero, zero, one], axis=-1)
        return t_vec, n_vec, b_vec

    return CurveSpec(
        name="arc" if W == 0 else "rotating-arc",
        gamma=gamma,
        frame_mode=FrameMode.ANALYTIC,
        frame=frame,
        gamma_t=gamma_t,
        t_final=t_final,
        domain=tuple(tuple(b) for b in domain),
        static=(W == 0),
        params={"center": c.tolist(), "radius": R, "angular_speed": W},
    )


def make_rotating_arc(
    center: Sequence[float] = (0.5, 0.5, 0.5),
    radius: float = 0.3,
    angular_speed: float = 0.5,
    t_final: float = 1.0,
    domain=UNIT_CUBE,
) -> CurveSpec:
    """Arc spinning about its center with angular speed W."""
    return make_arc(center, radius, angular_speed, t_final, domain)


def make_helix_wiggle(
    center: Sequence[float] = (0.5, 0.5, 0.5),
    radius: float = 0.15,
    pitch: float = 0.6,
    turns: float = 1.0,
    wiggle: float = 0.05,
    t_final: float = 1.0,
    domain=UNIT_CUBE,
) -> CurveSpec:
    """
    Helix around the z axis through center with a small time-periodic twist.

    Gamma(t, s) = c + (r cos th, r sin th, pitch (s - 1/2)) with
    th = 2 pi turns s + wiggle sin(2 pi t / T). Uses the rotation-minimizing frame.
    """
    c = _vec(center)
    r, p, k, w, T = float(radius), float(pitch), 2 * np.pi * float(turns), float(wiggle), float(t_final)

    def gamma(t, s):
        t, s = np.broadcast_arrays(t, s)
        th = k * s + w * np.sin(2 * np.pi * t / T)
        return c + np.stack([r * np.cos(th), r * np.sin(th), p * (s - 0.5)], axis=-1)

    def gamma_t(t, s):
        t, s = np.broadcast_arrays(t, s)
        th = k * s + w * np.sin(2 * np.pi * t / T)
        dth = w * (2 * np.pi / T) * np.cos(2 * np.pi * t / T)
        return np.stack([-r * np.sin(th) * dth, r * np.cos(th) * dth, np.zeros_like(th)], axis=-1)

    return CurveSpec(
        name="helix-wiggle",
        gamma=gamma,
        frame_mode=FrameMode.ROTATION_MINIMIZING,
        gamma_t=gamma_t,
        t_final=T,
        domain=tuple(tuple(b) for b in domain),
        static=(w == 0),
        params={"center": c.tolist(), "radius": r, "pitch": p, "turns": float(turns), "wiggle": w},
    )


def load_polyline(
    path: Union[str, Path],
    t_final: Optional[float] = None,
    domain=UNIT_CUBE,
) -> CurveSpec:
    """
    Load a sampled curve from whitespace-separated "t s x y z" rows.

    A single time slice gives a static curve interpolated by cubic splines in
    s; several slices must share the same s samples and are interpolated in
    (t, s) by bicubic splines. Lines starting with '#' are ignored.

    Raises:
        ValueError: If the file is empty or the samples do not form a grid
    """
    path = Path(path)
    df = pd.read_csv(path, sep=r"\s+", comment="#", header=None, names=["t", "s", "x", "y", "z"])
    if df.empty:
        raise ValueError(f"No samples in curve file {path}")
    df = df.sort_values(["t", "s"]).reset_index(drop=True)

    times = np.unique(df["t"].to_numpy())
    s_values = np.unique(df["s"].to_numpy())
    if len(df) != len(times) * len(s_values):
        raise ValueError(f"Curve file {path}: every time slice must use the same s samples")
    if len(s_values) < 4:
        raise ValueError(f"Curve file {path}: need at least 4 samples in s")

    xyz = df[["x", "y", "z"]].to_numpy().reshape(len(times), len(s_values), 3)
    s_range = (float(s_values[0]), float(s_values[-1]))

    if len(times) == 1:
        spline = CubicSpline(s_values, xyz[0], axis=0)

        def gamma(t, s):
            t, s = np.broadcast_arrays(t, s)
            return spline(s)

        static = True
        t_end = t_final or 1.0
    else:
        kt = min(3, len(times) - 1)
        splines = [RectBivariateSpline(times, s_values, xyz[:, :, k], kx=kt, ky=3) for k in range(3)]

        def gamma(t, s):
            t, s = np.broadcast_arrays(t, s)
            out = np.empty(t.shape + (3,))
            for k in range(3):
                out[..., k] = splines[k].ev(t, s)
            return out

        static = False
        t_end = t_final or float(times[-1])

    logger.info(f"Loaded curve '{path.name}' with {len(times)} time slice(s) x {len(s_values)} samples")
    return CurveSpec(
        name=path.name,
        gamma=gamma,
        frame_mode=FrameMode.ROTATION_MINIMIZING,
        t_final=t_end,
        domain=tuple(tuple(b) for b in domain),
        s_range=s_range,
        static=static,
        params={"file": str(path), "n_times": int(len(times)), "n_s": int(len(s_values))},
    )


CURVE_BUILDERS: Dict[str, Callable[..., CurveSpec]] = {
    "segment": make_segment,
    "translating-segment": make_translating_segment,
    "arc": make_arc,
    "rotating-arc": make_rotating_arc,
    "helix-wiggle": make_helix_wiggle,
}


def build_curve(
    name: str,
    params: Optional[Dict[str, Any]] = None,
    t_final: float = 1.0,
    domain=UNIT_CUBE,
    curve_file: Optional[str] = None,
) -> CurveSpec:
    """
    Build a named curve.

    Args:
        name: Built-in curve key or "polyline"
        params: Keyword arguments for the builder
        t_final: Final time T
        domain: Box Omega
        curve_file: Sample file for "polyline"

    Raises:
        ValueError: For unknown names or parameters
    """
    params = dict(params or {})
    if name == "polyline":
        if not curve_file:
            raise ValueError("polyline curves need a curve file")
        return load_polyline(curve_file, t_final=t_final, domain=domain)
    if name not in CURVE_BUILDERS:
        raise ValueError(f"Unknown curve '{name}'. Available: {sorted(CURVE_BUILDERS)} or 'polyline'")
    try:
        return CURVE_BUILDERS[name](t_final=t_final, domain=domain, **params)
    except TypeError as exc:
        raise ValueError(f"Bad parameters for curve '{name}': {exc}") from exc
