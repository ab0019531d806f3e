"""
Tests for run configuration loading, overrides and the resolved-config writer.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import pytest

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.run_config import (
    dump_run_config,
    get_default_config,
    get_section,
    load_run_config,
    parse_override,
    save_run_config,
    validate_run_config,
)
from src.exceptions import ConfigError


class TestDefaults:
    """Tests for the default configuration."""

    def test_defaults_validate(self):
        assert validate_run_config(get_default_config())

    def test_sections_are_copies(self):
        section = get_section("geometry")
        section["eps0"] = 5.0
        assert get_default_config().geometry["eps0"] == 0.1

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            get_section("broker")


class TestOverrides:
    """Tests for section.key=value overrides."""

    def test_parse_values(self):
        assert parse_override("solver.dt=0.01") == ("solver.dt", 0.01)
        assert parse_override("geometry.resolution=[8, 8, 8]") == ("geometry.resolution", [8, 8, 8])
        assert parse_override("geometry.curve=arc") == ("geometry.curve", "arc")
        assert parse_override("output.write_plots=false") == ("output.write_plots", False)

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_override("solver.dt")

    def test_apply_overrides(self):
        config = load_run_config(overrides=["solver.t_end=0.1", "material.u0.width=0.2"])
        assert config.solver["t_end"] == 0.1
        assert config.material["u0"]["kind"] == "bump"
        assert config.material["u0"]["width"] == 0.2

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(overrides=["solver.preconditioner=ilu"])
        assert excinfo.value.key == "solver.preconditioner"

    def test_invariant_violation(self):
        with pytest.raises(ConfigError, match="capacity.eps"):
            load_run_config(overrides=["capacity.eps=0.2"])
        with pytest.raises(ConfigError, match="material.theta"):
            load_run_config(overrides=["material.theta=2.0"])

    def test_field_table_needs_kind(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides=["material.v={ value = [1.0, 0.0, 0.0] }"])

    def test_replace(self):
        config = get_default_config().replace({"geometry.curve": "arc"})
        assert config.geometry["curve"] == "arc"
        with pytest.raises(ConfigError):
            get_default_config().replace({"solver.dt": -1.0})


class TestFiles:
    """Tests for TOML run files."""

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.toml")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[solver\ndt = 0.1\n")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_run_config(path)

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            '[geometry]\ncurve = "rotating-arc"\n\n'
            "[geometry.curve_params]\nangular_speed = 0.5\n\n"
            "[solver]\ndt = 0.01\n"
        )
        config = load_run_config(path, ["solver.dt=0.02"])
        assert config.geometry["curve"] == "rotating-arc"
        assert config.geometry["curve_params"] == {"angular_speed": 0.5}
        assert config.solver["dt"] == 0.02
        assert config.source == str(path)

    def test_resolved_config_round_trip(self, tmp_path):
        config = load_run_config(overrides=["geometry.curve_params={ radius = 0.25 }", "solver.tolerance=1e-10"])
        path = save_run_config(config, tmp_path / "resolved-config.toml")
        assert dump_run_config(config).startswith("# Resolved ccflow run configuration")
        assert load_run_config(path).to_dict() == config.to_dict()

    def test_resolved_config_is_plain_toml(self):
        config = get_default_config()
        data = tomllib.loads(dump_run_config(config))
        assert data["solver"] == config.solver
        assert data["geometry"]["resolution"] == config.geometry["resolution"]

    def test_unwritable_value(self):
        config = get_default_config()
        config.geometry["curve_params"] = {"radius": object()}
        with pytest.raises(ConfigError, match="cannot write"):
            dump_run_config(config)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
