"""
Tests for the command-line entry point.
"""

import json

import pytest

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, build_parser, main

SMALL_RUN = [
    "--set", "geometry.resolution=[8, 8, 8]",
    "--set", "solver.dt=0.005",
    "--set", "solver.t_end=0.01",
    "--set", "limit.n_s=16",
    "--set", "ladder.base_resolution=8",
    "--set", "ladder.max_resolution=8",
    "--set", "harness.refinement=[8, 12]",
    "--set", "output.write_plots=false",
    "--log-level", "WARNING",
]

REPORT_FILES = ("report.txt", "report.csv", "report.json", "resolved-config.toml")


class TestParser:
    """Tests for argument parsing."""

    def test_commands(self):
        args = build_parser().parse_args(["capacity-ladder", "--curve", "arc", "--f", "bump", "--deep"])
        assert args.command == "capacity-ladder"
        assert args.curve == "arc"
        assert args.f == "bump"
        assert args.deep

    def test_version(self, capsys):
        assert main(["version"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ccflow ")

    def test_unknown_command(self):
        assert main(["trade"]) == EXIT_USAGE


class TestConfigErrors:
    """Configuration problems exit with the usage code."""

    def test_missing_config_file(self, tmp_path):
        assert main(["coeff-check", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_override(self, tmp_path):
        assert main(["coeff-check", "--set", "solver.speed=2", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_curve(self, tmp_path):
        assert main(["coeff-check", "--curve", "trefoil", "--out", str(tmp_path)]) == EXIT_USAGE


class TestCommands:
    """End-to-end runs of cheap commands."""

    def test_coeff_check(self, tmp_path):
        code = main(["coeff-check", "--curve", "segment", "--out", str(tmp_path), "--log-level", "WARNING"])
        assert code == EXIT_OK
        for name in ("report.txt", "report.csv", "report.json", "resolved-config.toml"):
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["passed"] is True

    def test_capacity_ladder(self, tmp_path):
        code = main([
            "capacity-ladder", "--curve", "segment", "--f", "const",
            "--set", "geometry.resolution=[8, 8, 8]",
            "--set", "output.write_plots=false",
            "--out", str(tmp_path),
        ])
        assert code == EXIT_OK
        assert "CAPACITY LADDER: SEGMENT, F=CONST" in (tmp_path / "report.txt").read_text()
        assert not (tmp_path / "report.png").exists()


class TestSolverCommands:
    """solve-approx and solve-limit on static and moving curves."""

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_solve_approx(self, tmp_path, curve):
        code = main(["solve-approx", "--curve", curve, "--out", str(tmp_path), *SMALL_RUN])
        assert code == EXIT_OK
        for name in REPORT_FILES + ("approx-timeseries.csv",):
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "report.json").read_text())
        checks = {c["name"]: c for c in data["criteria"]}
        assert checks["mass_conservation"]["passed"] is True
        assert checks["energy_growth"]["hard"] is False

    def test_solve_approx_solver_failure(self, tmp_path):
        code = main(["solve-approx", "--curve", "segment", "--set", "solver.max_iterations=1", "--out", str(tmp_path), *SMALL_RUN])
        assert code == EXIT_FAIL
        assert (tmp_path / "resolved-config.toml").exists()

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_solve_limit(self, tmp_path, curve):
        code = main(["solve-limit", "--curve", curve, "--out", str(tmp_path), *SMALL_RUN])
        assert code == EXIT_OK
        for name in REPORT_FILES + ("limit-timeseries.csv", "curve-field.csv"):
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "report.json").read_text())
        checks = {c["name"]: c for c in data["criteria"]}
        assert checks["mass_conservation"]["passed"] is True
        assert checks["xi_vanishes_when_following"]["passed"] is True
        residuals = [c for name, c in checks.items() if name.startswith("weak_residual_")]
        assert len(residuals) == 5
        for check in residuals:
            assert check["hard"] is False
            assert check["passed"] is True
            assert check["value"] <= check["threshold"]

    def test_solve_limit_bad_override(self, tmp_path):
        assert main(["solve-limit", "--set", "limit.n_s=2", "--out", str(tmp_path)]) == EXIT_USAGE


class TestLadderCommands:
    """energy-ladder and compare on small grids."""

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_energy_ladder(self, tmp_path, curve):
        code = main(["energy-ladder", "--curve", curve, "--out", str(tmp_path), *SMALL_RUN])
        assert code == EXIT_OK
        for name in REPORT_FILES:
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["metadata"]["rule"] == "eps11"
        assert len(data["rungs"]) == 3
        criteria = {c["name"]: c for c in data["criteria"]}
        assert criteria["negative_control"]["hard"] is False

    def test_energy_ladder_bad_override(self, tmp_path):
        assert main(["energy-ladder", "--set", "ladder.n_rungs=2", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_compare_writes_both_reports(self, tmp_path):
        code = main(["compare", "--curve", "segment", "--out", str(tmp_path), *SMALL_RUN])
        assert code in (EXIT_OK, EXIT_FAIL)
        for name in REPORT_FILES:
            assert (tmp_path / name).exists()
        refinement = tmp_path / "weak-residual-refinement"
        assert (refinement / "report.json").exists()

        data = json.loads((tmp_path / "report.json").read_text())
        second = json.loads((refinement / "report.json").read_text())
        hard = [c["passed"] for c in data["criteria"] + second["criteria"] if c["hard"]]
        assert code == (EXIT_OK if all(hard) else EXIT_FAIL)

    def test_compare_bad_override(self, tmp_path):
        assert main(["compare", "--set", "harness.refinement=[8]", "--out", str(tmp_path)]) == EXIT_USAGE


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
