"""Reader for the versioned results CSV produced by the simulator's sweep.

The contract: a `# spotsched-results v1: ...` comment line, then a header
row, then data rows. Columns are bound by name, never by position.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass


class ContractError(ValueError):
    """The input file does not satisfy the results-CSV contract."""


REQUIRED_COLUMNS = ("trace_id", "policy", "K", "L", "D",
                    "cost_savings_pct", "overhead_to_opt_pct")

_FLOAT_COLUMNS = ("K", "mean_cost", "cost_stddev", "opt_cost",
                  "cost_savings_pct", "overhead_to_opt_pct")
_INT_COLUMNS = ("L", "D", "runs", "seed")


@dataclass(frozen=True, slots=True)
class ResultRow:
    trace_id: str
    policy: str
    K: float
    L: int
    D: int
    cost_savings_pct: float
    overhead_to_opt_pct: float
    extras: tuple


def critical_threshold(cost_ratio: float) -> float:
    """Deadline regime boundary: D >= (1 + 2*sqrt(K)) / (1 + sqrt(K)) * L is loose."""
    root = math.sqrt(cost_ratio)
    return (1 + 2 * root) / (1 + root)


def is_loose(row: ResultRow) -> bool:
    return row.D >= critical_threshold(row.K) * row.L


def load_rows(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines:
        raise ContractError(f"{path}: empty results file")
    reader = csv.DictReader(lines)
    missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ContractError(f"{path}: missing required columns {missing}")
    rows = []
    for raw in reader:
        try:
            rows.append(ResultRow(
                trace_id=raw["trace_id"],
                policy=raw["policy"],
                K=float(raw["K"]),
                L=int(raw["L"]),
                D=int(raw["D"]),
                cost_savings_pct=float(raw["cost_savings_pct"]),
                overhead_to_opt_pct=float(raw["overhead_to_opt_pct"]),
                extras=tuple(sorted(raw.items())),
            ))
        except (KeyError, ValueError) as exc:
            raise ContractError(f"{path}: malformed row {raw!r}: {exc}") from exc
    if not rows:
        raise ContractError(f"{path}: no data rows")
    return rows
