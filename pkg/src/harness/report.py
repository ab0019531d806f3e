"""
Report Module

Pass/fail criteria and convergence tables, written as text (console), JSON
(storage) and CSV, with a log-log convergence plot for ladders.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

# Configure logging
logger = logging.getLogger(__name__)


@dataclass
class Criterion:
    """
    One pass/fail criterion.

    Soft criteria (hard=False) are reported but never fail a run.
    """
    name: str
    passed: bool
    value: float
    threshold: float
    hard: bool = True
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ConvergenceReport:
    """
    Rung table of a ladder plus the criteria judged on it.

    Attributes:
        title: Report heading
        rungs: One dict per rung, eps first
        criteria: Judged criteria
        metadata: Run parameters
        runtime: Wall time in seconds
    """
    title: str
    rungs: List[Dict[str, Any]]
    criteria: List[Criterion] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    runtime: float = 0.0

    def __post_init__(self):
        if len(self.rungs) < 3:
            raise ValueError(f"A convergence report needs at least 3 rungs, got {len(self.rungs)}")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria if c.hard)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rungs)

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "runtime": self.runtime,
            "metadata": self.metadata,
            "criteria": [c.to_dict() for c in self.criteria],
            "rungs": self.rungs,
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class ReportWriter:
    """
    Render a ConvergenceReport or a SuiteReport.

    Both expose title, passed, criteria, metadata, runtime and to_frame();
    only ladders carry a rung table with an eps column worth plotting.

    Usage:
        writer = ReportWriter(report)
        print(writer.text())
        paths = writer.write_outputs("results/capacity")
    """

    def __init__(self, report: Any, error_columns: Optional[Sequence[str]] = None):
        """
        Initialize the writer.

        Args:
            report: ConvergenceReport or SuiteReport
            error_columns: Rung columns to plot against eps (default: every
                column ending in 'error' or 'distance')
        """
        self.report = report
        self.error_columns = list(error_columns) if error_columns else None

    @property
    def is_ladder(self) -> bool:
        return isinstance(self.report, ConvergenceReport)

    def table(self) -> pd.DataFrame:
        return self.report.to_frame()

    def text(self) -> str:
        r = self.report
        lines = []
        lines.append("=" * 70)
        lines.append(r.title.upper())
        lines.append("=" * 70)
        lines.append("")

        if r.metadata:
            lines.append("PARAMETERS")
            lines.append("-" * 40)
            for key, value in r.metadata.items():
                if isinstance(value, (list, dict)) and len(str(value)) > 60:
                    continue
                lines.append(f"{key}: {value}")
            lines.append("")

        table = self.table()
        if not table.empty:
            lines.append("RUNGS" if self.is_ladder else "CHECKS")
            lines.append("-" * 40)
            with pd.option_context("display.width", 120, "display.max_columns", 20, "display.float_format", "{:.6g}".format):
                lines.append(table.to_string(index=False))
            lines.append("")

        lines.append("CRITERIA")
        lines.append("-" * 40)
        for c in r.criteria:
            status = "PASS" if c.passed else ("FAIL" if c.hard else "WARN")
            line = f"[{status}] {c.name}: {c.value:.6g} (threshold {c.threshold:.6g})"
            if c.detail:
                line += f"  {c.detail}"
            lines.append(line)
        lines.append("")

        lines.append("=" * 70)
        lines.append(f"Result: {'PASS' if r.passed else 'FAIL'}   Runtime: {r.runtime:.2f}s")
        lines.append(f"Report Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        lines.append("=" * 70)
        return "\n".join(lines)

    def json(self) -> str:
        data = self.report.to_dict()
        data["criteria"] = [c.to_dict() for c in self.report.criteria]
        data["generated_at"] = datetime.now().isoformat()
        return json.dumps(data, indent=2, default=_jsonable)

    def plot(self, filepath: Union[str, Path]) -> Optional[Path]:
        """Log-log plot of the error columns against eps; None when nothing to plot."""
        if not self.is_ladder:
            return None
        table = self.table()
        if "eps" not in table.columns:
            return None
        columns = self.error_columns or [c for c in table.columns if c.endswith("error") or c.endswith("distance")]
        columns = [c for c in columns if c in table.columns and np.all(np.asarray(table[c], dtype=float) > 0)]
        if not columns:
            return None

        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig, ax = plt.subplots(figsize=(7, 5))
        for col in columns:
            ax.loglog(table["eps"], table[col], "o-", label=col)
        ax.set_xlabel("eps")
        ax.set_ylabel("error")
        ax.set_title(self.report.title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        return path

    def write_outputs(self, out_dir: Union[str, Path], stem: str = "report", plots: bool = True) -> Dict[str, Path]:
        """
        Write <stem>.txt, <stem>.json, <stem>.csv and, for ladders with plots on, <stem>.png.

        Returns:
            Written paths by format
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "txt": out / f"{stem}.txt",
            "json": out / f"{stem}.json",
            "csv": out / f"{stem}.csv",
        }
        paths["txt"].write_text(self.text() + "\n")
        paths["json"].write_text(self.json() + "\n")
        self.table().to_csv(paths["csv"], index=False)
        png = self.plot(out / f"{stem}.png") if plots else None
        if png is not None:
            paths["png"] = png
        logger.info(f"Report written to {out}")
        return paths
