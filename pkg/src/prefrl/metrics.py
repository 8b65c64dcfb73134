"""Structured run metrics: line-delimited JSON records plus a CSV summary."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Optional

from .errors import ContractError


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation or feedback-session event."""

    kind: str  # "eval" | "session" | "final"
    step: int
    labels_used: int
    true_return: Optional[float] = None
    heldout_accuracy: Optional[float] = None
    retained_fraction: Optional[float] = None
    mean_loss: Optional[float] = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))


class MetricsWriter:
    """Collects records in memory and optionally streams them to a .jsonl
    file as they arrive."""

    def __init__(self, path=None):
        self.records = []
        self._fh = open(path, "w") if path else None

    def write(self, record):
        if self.records and record.step < self.records[-1].step:
            raise ContractError("metrics steps must be monotone")
        self.records.append(record)
        if self._fh:
            self._fh.write(record.to_json() + "\n")
            self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_records(path):
    with open(path) as fh:
        return [MetricsRecord.from_json(line) for line in fh if line.strip()]


def write_summary_csv(rows, path):
    """Final comparison table (one row per run/variant)."""
    if not rows:
        return
    fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def format_table(rows):
    """Plain-text table for terminal output."""
    if not rows:
        return "(no rows)"
    headers = list(rows[0].keys())
    cells = [[_fmt_cell(r[h]) for h in headers] for r in rows]
    widths = [max(len(h), *(len(row[i]) for row in cells)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt_cell(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)
