"""
Capacity and Material Parameters

CapacityParams holds (eps0, eps, delta) and MaterialParams holds the bulk and
curve diffusivities, the floor theta, both velocity fields and the initial
datum. Both validate their invariants on construction.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .materials import (
    FieldSpec,
    ScalarField,
    TubeScalar,
    VectorField,
    build_scalar_field,
    build_tube_field,
    build_vector_field,
)

# Configure logging
logger = logging.getLogger(__name__)


class DeltaRule(Enum):
    """Coupling of the collar width delta to eps along a ladder."""
    EPS3 = "eps3"
    EPS11 = "eps11"
    EXPLICIT = "explicit"

    def delta(self, eps: float, constant: float = 1.0, explicit: Optional[float] = None) -> float:
        if self is DeltaRule.EPS3:
            return constant * eps ** 3
        if self is DeltaRule.EPS11:
            return constant * eps ** 11
        if explicit is None:
            raise ValueError("The explicit delta rule needs a delta value")
        return float(explicit)


@dataclass(frozen=True)
class CapacityParams:
    """
    Concentrated-capacity scales.

    Attributes:
        eps0: Chart radius
        eps: Core radius, 0 < eps < eps0
        delta: Collar width, 0 < delta < eps0 - eps
    """
    eps0: float
    eps: float
    delta: float

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError(f"eps0 must be positive, got {self.eps0}")
        if not 0 < self.eps < self.eps0:
            raise ValueError(f"Need 0 < eps < eps0, got eps={self.eps}, eps0={self.eps0}")
        if not 0 < self.delta < self.eps0 - self.eps:
            raise ValueError(
                f"Need 0 < delta < eps0 - eps = {self.eps0 - self.eps}, got delta={self.delta}"
            )

    @classmethod
    def from_rule(
        cls,
        eps0: float,
        eps: float,
        rule: DeltaRule = DeltaRule.EPS3,
        constant: float = 1.0,
        delta: Optional[float] = None,
    ) -> "CapacityParams":
        """Build parameters with delta chosen by a delta-rule."""
        return cls(eps0=eps0, eps=eps, delta=rule.delta(eps, constant, delta))

    @property
    def contrast(self) -> float:
        """eps0^2 / eps^2, the value of a on the core."""
        return (self.eps0 / self.eps) ** 2

    def to_dict(self) -> Dict[str, float]:
        return {"eps0": self.eps0, "eps": self.eps, "delta": self.delta}


def check_sampled_continuity(values_h: np.ndarray, values_half: np.ndarray, base: np.ndarray) -> bool:
    """
    Continuity surrogate from two sample offsets.

    Differences at offset h/2 must shrink against those at offset h, unless
    both are already at roundoff level.
    """
    diff_h = np.abs(values_h - base).max()
    diff_half = np.abs(values_half - base).max()
    return bool(diff_h < 1e-12 or diff_half <= 0.75 * diff_h)


@dataclass
class MaterialParams:
    """
    Material data of the diffusion-advection problem.

    Attributes:
        k0: Isotropic bulk diffusivity
        k_s: Principal diffusivity along the curve, f(s, nu, omega)
        k_n: Principal diffusivity across the curve, f(s, nu, omega)
        theta: Diffusivity floor
        v: Bulk velocity f(t, x)
        v_C: Tube velocity f(t, x)
        u0: Initial datum f(x)
        specs: Named field specs the closures were built from
    """
    k0: float
    k_s: TubeScalar
    k_n: TubeScalar
    theta: float
    v: VectorField
    v_C: VectorField
    u0: ScalarField
    specs: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not 0 < self.theta <= self.k0:
            raise ValueError(f"Need 0 < theta <= k0, got theta={self.theta}, k0={self.k0}")

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "MaterialParams":
        """Build from a material config section of named field tables."""
        specs = {name: FieldSpec.from_table(config[name]) for name in ("k_s", "k_n", "v", "v_C", "u0")}
        return cls(
            k0=float(config["k0"]),
            k_s=build_tube_field(specs["k_s"]),
            k_n=build_tube_field(specs["k_n"]),
            theta=float(config["theta"]),
            v=build_vector_field(specs["v"]),
            v_C=build_vector_field(specs["v_C"]),
            u0=build_scalar_field(specs["u0"]),
            specs={name: spec.to_dict() for name, spec in specs.items()},
        )

    def validate(
        self,
        eps0: float,
        domain: Sequence[Tuple[float, float]],
        t_final: float = 1.0,
        n_samples: int = 2000,
        seed: int = 42,
    ) -> bool:
        """
        Check the floor condition and sampled continuity.

        theta <= min(k0, inf k_s, inf k_n) is checked on random points of
        [-eps0, 1 + eps0] x D_eps0; continuity of every field by comparing
        differences at two sample offsets.

        Raises:
            ValueError: If a check fails
        """
        rng = np.random.default_rng(seed)
        s = rng.uniform(-eps0, 1 + eps0, n_samples)
        rho = eps0 * np.sqrt(rng.uniform(0, 1, n_samples))
        th = rng.uniform(0, 2 * np.pi, n_samples)
        nu, om = rho * np.cos(th), rho * np.sin(th)

        ks = self.k_s(s, nu, om)
        kn = self.k_n(s, nu, om)
        floor = min(self.k0, float(ks.min()), float(kn.min()))
        if self.theta > floor:
            raise ValueError(f"theta={self.theta} exceeds min(k0, inf k_s, inf k_n) = {floor}")

        lo = np.array([b[0] for b in domain])
        hi = np.array([b[1] for b in domain])
        x = rng.uniform(lo, hi, (n_samples, 3))
        t = float(rng.uniform(0, t_final))
        direction = rng.normal(size=(n_samples, 3))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        h = 1e-3 * float(np.max(hi - lo))

        checks = {
            "k_s": (self.k_s(s + h, nu, om), self.k_s(s + h / 2, nu, om), ks),
            "k_n": (self.k_n(s + h, nu, om), self.k_n(s + h / 2, nu, om), kn),
            "v": (self.v(t, x + h * direction), self.v(t, x + h / 2 * direction), self.v(t, x)),
            "v_C": (self.v_C(t, x + h * direction), self.v_C(t, x + h / 2 * direction), self.v_C(t, x)),
            "u0": (self.u0(x + h * direction), self.u0(x + h / 2 * direction), self.u0(x)),
        }
        for name, (far, near, base) in checks.items():
            if not np.all(np.isfinite(base)):
                raise ValueError(f"Material field {name} has non-finite samples")
            if not check_sampled_continuity(far, near, base):
                raise ValueError(f"Material field {name} fails the sampled continuity check")
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {"k0": self.k0, "theta": self.theta, **self.specs}
