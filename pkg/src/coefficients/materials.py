"""
Material Field Library

Named built-in fields used for diffusivities, velocities, initial data and
test functions. Each builder returns a vectorised closure; the config layer
selects them with a table such as {kind = "swirl", rate = 1.0}.

Signatures:
- tube scalar fields (k_s, k_n): f(s, nu, omega) -> array
- velocity fields (v, v_C): f(t, x) -> array (..., 3)
- ambient scalar fields (u0, test functions): f(x) -> array
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Sequence

import numpy as np

TubeScalar = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
VectorField = Callable[[float, np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FieldSpec:
    """
    Named field with its parameters, kept for reports and config round-trips.

    Attributes:
        kind: Built-in name
        params: Keyword parameters of the builder
    """
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_table(cls, table: Dict[str, Any]) -> "FieldSpec":
        table = dict(table)
        kind = table.pop("kind")
        return cls(kind=kind, params=table)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.params}


def _vec(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got {values}")
    return arr


# ---------------------------------------------------------------------------
# Tube scalar fields
# ---------------------------------------------------------------------------

def tube_constant(value: float = 1.0) -> TubeScalar:
    def f(s, nu, om):
        return np.full(np.broadcast_shapes(np.shape(s), np.shape(nu), np.shape(om)), float(value))
    return f


def tube_linear(value: float = 1.0, slope: float = 0.0) -> TubeScalar:
    """value + slope * s; stays positive on the chart only if value - |slope| (1 + eps0) > 0."""
    def f(s, nu, om):
        s, nu, om = np.broadcast_arrays(np.asarray(s, dtype=float), nu, om)
        return value + slope * s
    return f


TUBE_FIELDS: Dict[str, Callable[..., TubeScalar]] = {
    "constant": tube_constant,
    "linear": tube_linear,
}


# ---------------------------------------------------------------------------
# Velocity fields
# ---------------------------------------------------------------------------

def vector_constant(value: Sequence[float] = (0.0, 0.0, 0.0)) -> VectorField:
    v = _vec(value, "value")

    def f(t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(v, x.shape).copy()
    return f


def vector_linear(
    value: Sequence[float] = (0.0, 0.0, 0.0),
    gradient: Sequence[Sequence[float]] = ((0.0, 0.0, 0.0),) * 3,
    origin: Sequence[float] = (0.5, 0.5, 0.5),
) -> VectorField:
    """value + gradient (x - origin)."""
    v = _vec(value, "value")
    G = np.asarray(gradient, dtype=float)
    if G.shape != (3, 3):
        raise ValueError("gradient must be a 3x3 matrix")
    x0 = _vec(origin, "origin")

    def f(t, x):
        return v + (np.asarray(x, dtype=float) - x0) @ G.T
    return f


def vector_swirl(
    rate: float = 1.0,
    center: Sequence[float] = (0.5, 0.5, 0.5),
    axis: Sequence[float] = (0.0, 0.0, 1.0),
) -> VectorField:
    """Rigid rotation rate * axis x (x - center); divergence free."""
    c = _vec(center, "center")
    a = _vec(axis, "axis")
    a = a / np.linalg.norm(a)

    def f(t, x):
        return rate * np.cross(a, np.asarray(x, dtype=float) - c)
    return f


VECTOR_FIELDS: Dict[str, Callable[..., VectorField]] = {
    "constant": vector_constant,
    "zero": lambda: vector_constant((0.0, 0.0, 0.0)),
    "linear": vector_linear,
    "swirl": vector_swirl,
}


# ---------------------------------------------------------------------------
# Ambient scalar fields
# ---------------------------------------------------------------------------

def scalar_constant(value: float = 1.0) -> ScalarField:
    def f(x):
        return np.full(np.shape(x)[:-1], float(value))
    return f


def scalar_linear(
    value: float = 0.0,
    gradient: Sequence[float] = (1.0, 0.0, 0.0),
    origin: Sequence[float] = (0.0, 0.0, 0.0),
) -> ScalarField:
    """value + gradient . (x - origin)."""
    g = _vec(gradient, "gradient")
    x0 = _vec(origin, "origin")

    def f(x):
        return value + (np.asarray(x, dtype=float) - x0) @ g
    return f


def scalar_bump(
    amplitude: float = 1.0,
    center: Sequence[float] = (0.5, 0.5, 0.5),
    width: float = 0.15,
    base: float = 0.0,
) -> ScalarField:
    """base + amplitude exp(-|x - center|^2 / (2 width^2))."""
    c = _vec(center, "center")
    if width <= 0:
        raise ValueError("width must be positive")

    def f(x):
        r2 = np.sum((np.asarray(x, dtype=float) - c) ** 2, axis=-1)
        return base + amplitude * np.exp(-r2 / (2 * width ** 2))
    return f


def scalar_cosine(amplitude: float = 1.0, wavenumber: float = 1.0, base: float = 0.0) -> ScalarField:
    """base + amplitude cos(k pi x) cos(k pi y) cos(k pi z); zero normal derivative on the unit cube."""
    def f(x):
        x = np.asarray(x, dtype=float)
        k = wavenumber * np.pi
        return base + amplitude * np.prod(np.cos(k * x), axis=-1)
    return f


SCALAR_FIELDS: Dict[str, Callable[..., ScalarField]] = {
    "constant": scalar_constant,
    "linear": scalar_linear,
    "bump": scalar_bump,
    "cosine": scalar_cosine,
}

# Short names used by the capacity ladder (--f)
REFERENCE_FUNCTIONS: Dict[str, FieldSpec] = {
    "const": FieldSpec("constant", {"value": 1.0}),
    "linear": FieldSpec("linear", {"value": 0.0, "gradient": [1.0, 0.0, 0.0]}),
    "bump": FieldSpec("bump", {"amplitude": 1.0, "center": [0.5, 0.5, 0.5], "width": 0.2}),
}


def _build(registry: Dict[str, Callable[..., Any]], spec: FieldSpec, family: str):
    if spec.kind not in registry:
        raise ValueError(f"Unknown {family} field '{spec.kind}'. Available: {sorted(registry)}")
    try:
        return registry[spec.kind](**spec.params)
    except TypeError as exc:
        raise ValueError(f"Bad parameters for {family} field '{spec.kind}': {exc}") from exc


def build_tube_field(spec: FieldSpec) -> TubeScalar:
    return _build(TUBE_FIELDS, spec, "tube scalar")


def build_vector_field(spec: FieldSpec) -> VectorField:
    return _build(VECTOR_FIELDS, spec, "vector")


def build_scalar_field(spec: FieldSpec) -> ScalarField:
    return _build(SCALAR_FIELDS, spec, "scalar")


def reference_function(name: str) -> ScalarField:
    """Continuous test function f by short name (const, linear, bump)."""
    if name not in REFERENCE_FUNCTIONS:
        raise ValueError(f"Unknown test function '{name}'. Available: {sorted(REFERENCE_FUNCTIONS)}")
    return build_scalar_field(REFERENCE_FUNCTIONS[name])
