"""Suite records and report emission.

CSV carries one row per record under a single header; floats print with
17 significant digits so a reader recovers the exact double.  JSON
nests the same records under a metadata object with stable key order.
The wall-time metadata field is the only part of a report that varies
between identical runs, and CSV omits metadata entirely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import IoFailure

LEAD_COLUMNS = ("suite", "name", "passed", "residual", "bound")


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass
class Record:
    """One checked assertion or one emitted data point."""

    suite: str
    name: str
    passed: bool
    residual: Optional[float] = None
    bound: Optional[float] = None
    fields: Dict[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # suites compute with numpy scalars; json.dumps rejects those,
        # so coerce to builtins at the record boundary
        self.passed = bool(self.passed)
        if self.residual is not None:
            self.residual = float(self.residual)
        if self.bound is not None:
            self.bound = float(self.bound)
        self.fields = {k: (None if v is None else float(v))
                       for k, v in self.fields.items()}


@dataclass
class Report:
    records: List[Record] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failed(self) -> List[Record]:
        return [r for r in self.records if not r.passed]


def _data_columns(report: Report) -> List[str]:
    cols: List[str] = []
    for r in report.records:
        for k in r.fields:
            if k not in cols:
                cols.append(k)
    return cols


def render_csv(report: Report) -> str:
    cols = _data_columns(report)
    lines = [",".join(LEAD_COLUMNS + tuple(cols))]
    for r in report.records:
        row = [r.suite, r.name, "true" if r.passed else "false",
               "" if r.residual is None else format_float(r.residual),
               "" if r.bound is None else format_float(r.bound)]
        for c in cols:
            v = r.fields.get(c)
            row.append("" if v is None else format_float(v))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_json(report: Report) -> str:
    payload = {
        "metadata": report.metadata,
        "records": [
            {
                "suite": r.suite,
                "name": r.name,
                "passed": r.passed,
                "residual": r.residual,
                "bound": r.bound,
                "fields": r.fields,
            }
            for r in report.records
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def emit(report: Report, path: str, fmt: str) -> None:
    if fmt == "csv":
        text = render_csv(report)
    elif fmt == "json":
        text = render_json(report)
    else:
        raise IoFailure(f"unknown output format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
