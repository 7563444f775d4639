"""Rendering of analysis reports as aligned text, JSON or CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any


@dataclass
class Table:
    title: str
    columns: list[str]
    rows: list[list[Any]]


@dataclass
class AnalysisReport:
    command: str
    data: dict[str, Any]
    tables: list[Table] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def document(self) -> dict[str, Any]:
        doc = {"command": self.command, "warnings": list(self.warnings)}
        doc.update(self.data)
        return doc


def report_schema() -> dict[str, Any]:
    text = resources.files("swingsym").joinpath("data/report.schema.json").read_text()
    return json.loads(text)


def _cell(value: Any, digits: int = 4) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = f"{value:.{digits}f}"
        return "0." + "0" * digits if text == "-0." + "0" * digits else text
    return str(value)


def to_plain(value: Any) -> Any:
    """Full-precision, JSON-safe copy of a value (numpy scalars included)."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return to_plain(value.tolist())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_text(report: AnalysisReport) -> str:
    out = []
    for note in report.notes:
        out.append(note)
    for table in report.tables:
        if out:
            out.append("")
        out.append(table.title)
        cells = [[_cell(v) for v in row] for row in table.rows]
        widths = [len(c) for c in table.columns]
        for row in cells:
            widths = [max(w, len(c)) for w, c in zip(widths, row)]
        out.append("  ".join(c.ljust(w) for c, w in zip(table.columns, widths)).rstrip())
        out.append("  ".join("-" * w for w in widths))
        for row in cells:
            line = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            out.append("  ".join(line).rstrip())
    for w in report.warnings:
        out.append(f"warning: {w}")
    return "\n".join(out) + "\n"


def render_json(report: AnalysisReport) -> str:
    return json.dumps(to_plain(report.document()), indent=2) + "\n"


def render_csv(report: AnalysisReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for k, table in enumerate(report.tables):
        if k:
            writer.writerow([])
        writer.writerow([f"# {table.title}"])
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v)
                             for v in row])
    return buf.getvalue()


RENDERERS = {"text": render_text, "json": render_json, "csv": render_csv}


def render(report: AnalysisReport, fmt: str = "text") -> str:
    try:
        return RENDERERS[fmt](report)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None
