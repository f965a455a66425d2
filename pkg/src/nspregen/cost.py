"""Wall-clock cost records, per-tier aggregation, and the planner's cost model.

Records are appended to a CSV log by whoever runs simulations; the
aggregation is a pure fold over that log, grouping by (axis, tier).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import MissingTier
from .geometry import Axis, Tier

__all__ = [
    "CostRecord",
    "CostCell",
    "CostTable",
    "CostModel",
    "aggregate_costs",
    "fit_cost_model",
    "check_monotonicity",
    "write_cost_csv",
    "read_cost_csv",
    "write_cost_table_csv",
    "read_cost_table_csv",
]

COST_CSV_COLUMNS = (
    "sim_id", "axis", "tier", "obstacles", "re",
    "wall_seconds", "steps", "cg_iters", "host",
)


@dataclass(frozen=True)
class CostRecord:
    sim_id: str
    axis: str  # Axis value, or "" when unlabeled
    tier: str  # Tier value, or "" when unlabeled
    obstacle_count: int
    re: float
    wall_seconds: float
    steps: int
    cg_iters_total: int
    host: str

    def labeled(self, axis: Axis, tier: Tier) -> "CostRecord":
        return replace(self, axis=axis.value, tier=tier.value)


@dataclass(frozen=True)
class CostCell:
    mean_seconds: float
    std: float
    n: int


@dataclass
class CostTable:
    cells: dict[tuple[str, str], CostCell]

    def get(self, axis: Axis | str, tier: Tier | str) -> CostCell | None:
        key = (str(getattr(axis, "value", axis)), str(getattr(tier, "value", tier)))
        return self.cells.get(key)


@dataclass(frozen=True)
class CostModel:
    """Seconds per simulation for each tier along one axis."""

    axis: str
    c: dict[str, float]

    def cost(self, tier: Tier | str) -> float:
        return self.c[str(getattr(tier, "value", tier))]


def aggregate_costs(records: list[CostRecord]) -> CostTable:
    """Group records by (axis, tier) and reduce to mean/std/count.

    std is the population standard deviation, so a single record
    yields 0 rather than NaN.
    """
    if not records:
        raise ValueError("no cost records to aggregate")
    groups: dict[tuple[str, str], list[float]] = {}
    for r in records:
        groups.setdefault((r.axis, r.tier), []).append(r.wall_seconds)
    cells = {}
    for key, secs in groups.items():
        n = len(secs)
        mean = sum(secs) / n
        var = sum((s - mean) ** 2 for s in secs) / n
        cells[key] = CostCell(mean, math.sqrt(var), n)
    return CostTable(cells)


def fit_cost_model(table: CostTable, axis: Axis | str) -> CostModel:
    """Pass-through model: c(tier) = the cell mean along `axis`."""
    axis_val = str(getattr(axis, "value", axis))
    c = {}
    for tier in (Tier.EASY, Tier.MEDIUM, Tier.HARD):
        cell = table.get(axis_val, tier)
        if cell is None:
            raise MissingTier(f"no {tier.value} cell for axis {axis_val}")
        c[tier.value] = cell.mean_seconds
    return CostModel(axis_val, c)


def check_monotonicity(table: CostTable, axis: Axis | str) -> dict:
    """Report whether mean(easy) < mean(medium) < mean(hard) on `axis`."""
    axis_val = str(getattr(axis, "value", axis))
    means = {}
    for tier in (Tier.EASY, Tier.MEDIUM, Tier.HARD):
        cell = table.get(axis_val, tier)
        if cell is None:
            raise MissingTier(f"no {tier.value} cell for axis {axis_val}")
        means[tier.value] = cell.mean_seconds
    e, m, h = means["easy"], means["medium"], means["hard"]
    return {
        "axis": axis_val,
        "means": means,
        "monotone": e < m < h,
        "ratio_medium_easy": m / e if e > 0 else math.inf,
        "ratio_hard_medium": h / m if m > 0 else math.inf,
        "ratio_hard_easy": h / e if e > 0 else math.inf,
        "margin_medium_easy": m - e,
        "margin_hard_medium": h - m,
    }


def write_cost_csv(records: list[CostRecord], path: Path | str,
                   append: bool = False) -> None:
    path = Path(path)
    mode = "a" if append and path.exists() else "w"
    with open(path, mode, newline="") as f:
        writer = csv.writer(f)
        if mode == "w":
            writer.writerow(COST_CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.sim_id, r.axis, r.tier, r.obstacle_count,
                repr(r.re), repr(r.wall_seconds), r.steps,
                r.cg_iters_total, r.host,
            ])


def read_cost_csv(path: Path | str) -> list[CostRecord]:
    records = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            records.append(CostRecord(
                sim_id=row["sim_id"],
                axis=row["axis"],
                tier=row["tier"],
                obstacle_count=int(row["obstacles"]),
                re=float(row["re"]),
                wall_seconds=float(row["wall_seconds"]),
                steps=int(row["steps"]),
                cg_iters_total=int(row["cg_iters"]),
                host=row["host"],
            ))
    return records


def write_cost_table_csv(table: CostTable, path: Path | str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["axis", "tier", "mean_seconds", "std", "n"])
        for (axis, tier), cell in sorted(table.cells.items()):
            writer.writerow([axis, tier, repr(cell.mean_seconds),
                             repr(cell.std), cell.n])


def read_cost_table_csv(path: Path | str) -> CostTable:
    cells = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            cells[(row["axis"], row["tier"])] = CostCell(
                float(row["mean_seconds"]), float(row["std"]), int(row["n"])
            )
    return CostTable(cells)
