"""Machine-readable experiment reports.

A report is one experiment's full record: configuration echo, the module
convention header, named metrics (each tagged with the mathematical claim it
tests), pass/fail verdicts, side tables (CSV) and figure requests for the
separate rendering package.  Serialization is deterministic: identical
config and seed produce byte-identical ``report.json`` apart from the
``timestamp`` block.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ContractViolationError
from .heisenberg import CONVENTIONS

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "Metric",
    "Verdict",
    "ExperimentConfig",
    "ExperimentReport",
    "emit_report",
]


@dataclass(frozen=True)
class Metric:
    """One measured number, tagged with the claim it tests."""

    name: str
    value: float
    claim: str

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "claim": self.claim}


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: dict
    seed: int


@dataclass
class ExperimentReport:
    id: str
    seed: int
    params: dict
    metrics: list[Metric]
    verdicts: list[Verdict]
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    figures: list[dict] = field(default_factory=list)
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))
    runtime_seconds: float = 0.0
    created: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat()

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)

    def metric(self, name: str) -> Metric:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "id": self.id,
            "seed": self.seed,
            "params": self.params,
            "conventions": self.conventions,
            "metrics": [m.to_dict() for m in self.metrics],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "figures": self.figures,
            "passed": self.passed,
            "timestamp": {
                "created": self.created,
                "runtime_seconds": self.runtime_seconds,
            },
        }

    def json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n").encode()


def emit_report(report: ExperimentReport, out_dir,
                formats=("json", "csv", "manifest")) -> list[Path]:
    """Write the report and its side files; returns the created paths.

    ``json`` writes report.json, ``csv`` writes metrics.csv plus any side
    tables, ``manifest`` writes the figure manifest consumed by the
    rendering package.  A report without metrics is refused.
    """
    if not report.metrics:
        raise ContractViolationError("refusing to emit a report without metrics")
    if not report.verdicts:
        raise ContractViolationError("refusing to emit a report without verdicts")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_bytes(report.json_bytes())
        written.append(path)
    if "csv" in formats:
        path = out_dir / "metrics.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "value", "claim"])
            for m in report.metrics:
                writer.writerow([m.name, repr(m.value), m.claim])
        written.append(path)
        for fname, (header, rows) in report.tables.items():
            tpath = out_dir / fname
            with open(tpath, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
            written.append(tpath)
    if "manifest" in formats:
        manifest = {
            "schema_version": report.schema_version,
            "id": report.id,
            "report": "report.json",
            "figures": report.figures,
        }
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        written.append(path)
    return written
