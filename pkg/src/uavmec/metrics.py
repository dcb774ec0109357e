"""Deterministic CSV and JSON writers for run artifacts.

Floats are rendered with ``repr`` (shortest round-trip form), so identical
computations produce byte-identical files; nothing time- or host-dependent
belongs in these tables.
"""

from __future__ import annotations

import csv
import json
import os


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return str(int(value))
    return str(value)


def write_csv(path: str, rows: list[dict], fieldnames: list[str] | None = None
              ) -> None:
    """One header row then one record per dict, dot-decimal floats."""
    if fieldnames is None:
        if not rows:
            raise ValueError(f"cannot infer a header for empty {path}")
        fieldnames = list(rows[0].keys())
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(name, "")) for name in fieldnames])


def read_csv(path: str) -> list[dict]:
    """Rows as dicts with numeric fields parsed back to float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                try:
                    row[key] = float(val)
                except (TypeError, ValueError):
                    row[key] = val
            rows.append(row)
        return rows


def write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
