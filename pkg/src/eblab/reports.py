"""Deterministic experiment reports: CSV tables with JSON sidecars.

Every run is described by an ``ExperimentSpec`` (name, parameters, seed,
tolerances, thread count) and produces an ``ExperimentReport`` whose rows
are plain dicts sharing a single column set.  Serialization is fully
deterministic: floats print as %.17g (round-trip exact for doubles),
lines end with LF, and row order never depends on thread scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "UnknownExperiment",
    "InvalidParameter",
    "ExperimentSpec",
    "ExperimentReport",
    "format_value",
]


class UnknownExperiment(ValueError):
    """Raised for an experiment name with no registered runner."""


class InvalidParameter(ValueError):
    """Raised when experiment parameters fail validation."""


def format_value(value) -> str:
    """Render a cell: floats as %.17g, bools as 0/1, rest via str."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class ExperimentSpec:
    """Echoable description of a run; everything needed to reproduce it."""

    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    abs_tol: float = 1e-11
    rel_tol: float = 1e-9
    threads: int = 1

    def to_json_dict(self) -> dict:
        # thread count is execution plumbing, not experiment identity:
        # leaving it out keeps report bytes equal across --threads values
        return {
            "name": self.name,
            "params": self.params,
            "seed": self.seed,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
        }


@dataclass
class ExperimentReport:
    """Rows plus metadata; knows how to write itself out."""

    spec: ExperimentSpec
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format_value(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "columns": list(self.columns),
            "row_count": len(self.rows),
            "summary": self.summary,
        }

    def write(self, out_path) -> None:
        """Write <out>.csv and <out>.json (suffix replaced if present)."""
        import pathlib

        out = pathlib.Path(out_path)
        if out.suffix == ".csv":
            out = out.with_suffix("")
        csv_path = out.with_suffix(".csv")
        json_path = out.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            fh.write(self.csv_text())
        with open(json_path, "w", newline="") as fh:
            json.dump(self.json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def rows_from_dicts(dicts, columns) -> list:
    """Validate that every dict covers the column set; return as list."""
    rows = []
    for d in dicts:
        missing = [c for c in columns if c not in d]
        if missing:
            raise InvalidParameter(f"row missing columns: {missing}")
        rows.append(d)
    return rows


def summary_value(value) -> Any:
    """JSON-safe scalar: numpy scalars to Python, floats kept as floats."""
    if hasattr(value, "item"):
        return value.item()
    return value
