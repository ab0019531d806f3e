"""
Run Configuration Module.

Loads a TOML run file on top of the defaults in settings.py, applies
command-line overrides, validates everything and writes the resolved
configuration back out so any run can be reproduced from its artifact.
"""

import copy
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import tomli_w

from .settings import (
    CAPACITY_CONFIG,
    GEOMETRY_CONFIG,
    HARNESS_CONFIG,
    LADDER_CONFIG,
    LIMIT_CONFIG,
    MATERIAL_CONFIG,
    OUTPUT_CONFIG,
    QUADRATURE_CONFIG,
    SOLVER_CONFIG,
)
from src.exceptions import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_SECTIONS: Dict[str, Dict[str, Any]] = {
    "geometry": GEOMETRY_CONFIG,
    "capacity": CAPACITY_CONFIG,
    "material": MATERIAL_CONFIG,
    "quadrature": QUADRATURE_CONFIG,
    "solver": SOLVER_CONFIG,
    "limit": LIMIT_CONFIG,
    "ladder": LADDER_CONFIG,
    "harness": HARNESS_CONFIG,
    "output": OUTPUT_CONFIG,
}

# Tables whose inner keys are free-form and not checked against the defaults
OPEN_TABLES = {("geometry", "curve_params")}
FIELD_TABLES = {("material", name) for name in ("k_s", "k_n", "v", "v_C", "u0")}

VALID_CURVES = ["segment", "translating-segment", "arc", "rotating-arc", "helix-wiggle", "polyline"]
VALID_DELTA_RULES = ["eps3", "eps11", "explicit"]
VALID_TEST_FUNCTIONS = ["const", "linear", "bump"]


@dataclass
class RunConfig:
    """
    Fully resolved run configuration.

    Attributes:
        geometry: Curve, chart and domain settings
        capacity: eps, delta and the delta-rule constant
        material: k0, theta and the named material fields
        quadrature: Tube quadrature densities
        solver: Time stepping and linear solver settings
        limit: Curve mesh and exchange model of the limit solver
        ladder: eps-ladder layout
        harness: Sample counts, seeds and acceptance thresholds
        output: Output directory and logging
        source: File the configuration was read from, if any
    """
    geometry: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(GEOMETRY_CONFIG))
    capacity: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(CAPACITY_CONFIG))
    material: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(MATERIAL_CONFIG))
    quadrature: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(QUADRATURE_CONFIG))
    solver: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(SOLVER_CONFIG))
    limit: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(LIMIT_CONFIG))
    ladder: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(LADDER_CONFIG))
    harness: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(HARNESS_CONFIG))
    output: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(OUTPUT_CONFIG))
    source: Optional[str] = None

    def section(self, name: str) -> Dict[str, Any]:
        """Get a deep copy of one configuration section."""
        if name not in DEFAULT_SECTIONS:
            raise ConfigError("unknown section", key=name)
        return copy.deepcopy(getattr(self, name))

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        """Convert to a plain nested dictionary (without the source path)."""
        return {name: copy.deepcopy(getattr(self, name)) for name in DEFAULT_SECTIONS}

    def replace(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Return a validated copy with dotted-key overrides applied."""
        data = self.to_dict()
        for key, value in overrides.items():
            _set_dotted(data, key, value)
        new = RunConfig(**data, source=self.source)
        validate_run_config(new)
        return new


def get_default_config() -> RunConfig:
    """Get a fresh configuration holding only the defaults."""
    return RunConfig()


def get_section(name: str) -> Dict[str, Any]:
    """Get a copy of the default settings of one section."""
    if name not in DEFAULT_SECTIONS:
        raise ConfigError("unknown section", key=name)
    return copy.deepcopy(DEFAULT_SECTIONS[name])


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Iterable[str]] = None,
) -> RunConfig:
    """
    Load a run configuration.

    Args:
        path: TOML file to merge over the defaults (None for defaults only)
        overrides: "section.key=value" strings applied after the file

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing or malformed, a key is unknown,
            or a parameter invariant is violated
    """
    data = {name: copy.deepcopy(defaults) for name, defaults in DEFAULT_SECTIONS.items()}

    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", key="--config")
        try:
            with open(path, "rb") as fh:
                loaded = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            # tomllib reports "(at line X, column Y)" in the message
            raise ConfigError(f"cannot parse {path}: {exc}", key="--config") from exc
        _merge_file(data, loaded)
        logger.info(f"Loaded run configuration from {path}")

    for item in overrides or []:
        key, value = parse_override(item)
        _set_dotted(data, key, value)

    config = RunConfig(**data, source=None if path is None else str(path))
    validate_run_config(config)
    return config


def parse_override(item: str) -> Tuple[str, Any]:
    """
    Parse one "section.key=value" override.

    The value is read as a TOML value when possible ("0.2", "[1, 2]",
    "true"), otherwise kept as a bare string.
    """
    if "=" not in item:
        raise ConfigError(f"override must look like section.key=value, got '{item}'", key=item)
    key, raw = item.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    try:
        value = tomllib.loads(f"value = {raw}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def _merge_file(data: Dict[str, Dict[str, Any]], loaded: Dict[str, Any]) -> None:
    for section, table in loaded.items():
        if section not in data:
            raise ConfigError("unknown section", key=section)
        if not isinstance(table, dict):
            raise ConfigError("section must be a table", key=section)
        for key, value in table.items():
            _set_dotted(data, f"{section}.{key}", value)


def _set_dotted(data: Dict[str, Dict[str, Any]], key: str, value: Any) -> None:
    parts = key.split(".")
    if len(parts) < 2 or parts[0] not in data:
        raise ConfigError("unknown key", key=key)
    section, name = parts[0], parts[1]
    table = data[section]
    if name not in table:
        raise ConfigError("unknown key", key=key)

    if len(parts) == 2:
        if (section, name) in FIELD_TABLES or (section, name) in OPEN_TABLES:
            if not isinstance(value, dict):
                raise ConfigError("expected a table", key=key)
            if (section, name) in FIELD_TABLES and "kind" not in value:
                raise ConfigError("field table needs a 'kind'", key=key)
            table[name] = copy.deepcopy(value)
        else:
            table[name] = value
        return

    # section.table.inner=value
    if (section, name) not in FIELD_TABLES and (section, name) not in OPEN_TABLES:
        raise ConfigError("unknown key", key=key)
    inner = table[name]
    for part in parts[2:-1]:
        inner = inner.setdefault(part, {})
    inner[parts[-1]] = value


def _require(condition: bool, key: str, message: str, value: Any = None) -> None:
    if not condition:
        raise ConfigError(message, key=key, value=value)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_run_config(config: RunConfig) -> bool:
    """
    Validate a run configuration.

    Checks key types and the parameter invariants of the capacity, material
    and solver data. The dataclasses built from the configuration validate
    again on construction.

    Returns:
        True if configuration is valid

    Raises:
        ConfigError: If configuration is invalid
    """
    geo, cap, mat = config.geometry, config.capacity, config.material
    sol, lim, lad, har = config.solver, config.limit, config.ladder, config.harness

    _require(geo["curve"] in VALID_CURVES, "geometry.curve", f"must be one of {VALID_CURVES}", geo["curve"])
    if geo["curve"] == "polyline":
        _require(bool(geo["curve_file"]), "geometry.curve_file", "polyline curves need a curve_file")
    _require(_is_number(geo["eps0"]) and geo["eps0"] > 0, "geometry.eps0", "must be > 0", geo["eps0"])
    _require(_is_number(geo["t_final"]) and geo["t_final"] > 0, "geometry.t_final", "must be > 0")
    domain = geo["domain"]
    _require(
        isinstance(domain, list) and len(domain) == 3
        and all(isinstance(b, list) and len(b) == 2 and b[0] < b[1] for b in domain),
        "geometry.domain", "must be [[x0, x1], [y0, y1], [z0, z1]] with x0 < x1", domain,
    )
    res = geo["resolution"]
    _require(
        isinstance(res, list) and len(res) == 3 and all(isinstance(n, int) and n >= 1 for n in res),
        "geometry.resolution", "must be three positive integers", res,
    )
    _require(_is_number(geo["fd_step"]) and 0 < geo["fd_step"] < 1e-2, "geometry.fd_step", "must be in (0, 1e-2)")

    eps0 = geo["eps0"]
    _require(_is_number(cap["eps"]) and 0 < cap["eps"] < eps0, "capacity.eps", "must satisfy 0 < eps < eps0", cap["eps"])
    _require(_is_number(cap["delta_constant"]) and cap["delta_constant"] > 0, "capacity.delta_constant", "must be > 0")
    _require(sol["delta_rule"] in VALID_DELTA_RULES, "solver.delta_rule", f"must be one of {VALID_DELTA_RULES}")
    if sol["delta_rule"] == "explicit":
        _require(
            _is_number(cap["delta"]) and 0 < cap["delta"] < eps0 - cap["eps"],
            "capacity.delta", "must satisfy 0 < delta < eps0 - eps", cap["delta"],
        )

    _require(_is_number(mat["k0"]) and mat["k0"] > 0, "material.k0", "must be > 0")
    _require(
        _is_number(mat["theta"]) and 0 < mat["theta"] <= mat["k0"],
        "material.theta", "must satisfy 0 < theta <= k0", mat["theta"],
    )

    _require(_is_number(sol["dt"]) and sol["dt"] > 0, "solver.dt", "must be > 0", sol["dt"])
    _require(_is_number(sol["t_end"]) and sol["t_end"] > 0, "solver.t_end", "must be > 0", sol["t_end"])
    _require(
        _is_number(sol["tolerance"]) and 0 < sol["tolerance"] <= 1e-4,
        "solver.tolerance", "must be in (0, 1e-4]", sol["tolerance"],
    )
    _require(isinstance(sol["max_iterations"], int) and sol["max_iterations"] > 0, "solver.max_iterations", "must be > 0")
    _require(isinstance(sol["snapshot_every"], int) and sol["snapshot_every"] > 0, "solver.snapshot_every", "must be > 0")

    _require(isinstance(lim["n_s"], int) and lim["n_s"] >= 3, "limit.n_s", "must be an integer >= 3")
    _require(_is_number(lim["r_avg_cells"]) and lim["r_avg_cells"] > 0, "limit.r_avg_cells", "must be > 0")
    _require(_is_number(lim["lambda_ex"]) and lim["lambda_ex"] >= 0, "limit.lambda_ex", "must be >= 0")

    _require(isinstance(lad["n_rungs"], int) and lad["n_rungs"] >= 3, "ladder.n_rungs", "a ladder needs at least 3 rungs")
    _require(isinstance(lad["deep_rungs"], int) and lad["deep_rungs"] >= lad["n_rungs"], "ladder.deep_rungs", "must be >= n_rungs")
    _require(isinstance(lad["first_rung"], int) and lad["first_rung"] >= 1, "ladder.first_rung", "must be >= 1")

    _require(har["f"] in VALID_TEST_FUNCTIONS, "harness.f", f"must be one of {VALID_TEST_FUNCTIONS}")
    deltas = har["gap_deltas"]
    _require(
        isinstance(deltas, list) and len(deltas) >= 2 and all(_is_number(d) and d > 0 for d in deltas),
        "harness.gap_deltas", "needs at least two positive widths",
    )
    _require(isinstance(har["refinement"], list) and len(har["refinement"]) >= 2, "harness.refinement", "needs two resolutions")

    return True


# ---------------------------------------------------------------------------
# Resolved-config writer
# ---------------------------------------------------------------------------

def dump_run_config(config: RunConfig) -> str:
    """Render a configuration as TOML text that load_run_config reads back."""
    sections = {name: getattr(config, name) for name in DEFAULT_SECTIONS}
    try:
        body = tomli_w.dumps(sections)
    except TypeError as exc:
        raise ConfigError(f"cannot write resolved configuration: {exc}") from exc
    return "# Resolved ccflow run configuration\n\n" + body


def save_run_config(config: RunConfig, path: Union[str, Path]) -> Path:
    """Write the resolved configuration to a TOML file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_run_config(config))
    logger.info(f"Resolved configuration written to {path}")
    return path


__all__ = [
    "RunConfig",
    "get_default_config",
    "get_section",
    "load_run_config",
    "parse_override",
    "validate_run_config",
    "dump_run_config",
    "save_run_config",
]
