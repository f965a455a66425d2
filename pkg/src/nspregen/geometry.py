"""Obstacle layouts, blocked-cell masks, and signed distance fields.

Conventions used throughout the toolkit:

* the physical domain is the rectangle [0, Lx] x [0, Ly] with
  ``domain_size = (Lx, Ly)`` in meters;
* grids have shape (H, W): index [j, i] is the cell in row j (y) and
  column i (x), with j = 0 the bottom row, so ``dy = Ly / H`` and
  ``dx = Lx / W``; cell centers sit at ((i + 0.5) dx, (j + 0.5) dy);
* masks are boolean with True = fluid, False = solid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import AllSolid, OutOfRange, PlacementExhausted
from .rng import stream

__all__ = [
    "Axis",
    "Tier",
    "DifficultyTier",
    "Rect",
    "ObstacleSet",
    "BinaryMask",
    "SdfField",
    "sample_obstacles",
    "rasterize_mask",
    "compute_sdf",
    "classify_geometry_difficulty",
]

MAX_OBSTACLES = 10


class Tier(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class Axis(str, Enum):
    GEOMETRY = "geometry"
    PHYSICS = "physics"
    COMBINED = "combined"


@dataclass(frozen=True)
class DifficultyTier:
    """A difficulty label together with the axis it was assigned on."""

    level: Tier
    axis: Axis


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; (x, y) is the lower-left corner, meters."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x2 and self.y <= py <= self.y2

    def separation_ok(self, other: "Rect", gap: float) -> bool:
        """True if the axis-aligned gap between the rectangles is >= gap."""
        return (
            self.x >= other.x2 + gap
            or other.x >= self.x2 + gap
            or self.y >= other.y2 + gap
            or other.y >= self.y2 + gap
        )


@dataclass(frozen=True)
class ObstacleSet:
    obstacles: tuple[Rect, ...]
    seed: int
    domain_size: tuple[float, float]

    def __len__(self) -> int:
        return len(self.obstacles)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "domain": list(self.domain_size),
            "rects": [{"x": r.x, "y": r.y, "w": r.w, "h": r.h} for r in self.obstacles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ObstacleSet":
        rects = tuple(Rect(r["x"], r["y"], r["w"], r["h"]) for r in data["rects"])
        return cls(rects, int(data["seed"]), tuple(data["domain"]))


@dataclass
class BinaryMask:
    """Fluid/solid raster. grid[j, i] is True where the cell is fluid."""

    grid: np.ndarray
    cell_size: tuple[float, float]  # (dx, dy), meters
    domain_size: tuple[float, float]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def n_fluid(self) -> int:
        return int(self.grid.sum())


@dataclass
class SdfField:
    """Signed distance to the nearest obstacle interface, meters.

    Positive in fluid, non-positive in solid. Distances are measured to
    obstacle surfaces only; the outer walls do not contribute, and an
    obstacle-free mask is filled with the domain-diagonal cap so the
    channel still separates geometry tiers.
    """

    grid: np.ndarray
    cell_size: tuple[float, float] = field(default=(0.0, 0.0))


def sample_obstacles(
    count: int,
    domain: tuple[float, float],
    size_range: tuple[float, float],
    margin_min: float,
    gap_min: float,
    seed: int,
    max_attempts: int = 10_000,
) -> ObstacleSet:
    """Place `count` non-overlapping square obstacles by rejection sampling.

    Squares have side drawn uniformly from `size_range`, lie at least
    `margin_min` from every wall, and keep a gap of at least `gap_min`
    from each other. Deterministic for fixed arguments. Raises
    PlacementExhausted after `max_attempts` rejected draws, which
    signals an over-constrained parameter set (e.g. obstacles too large
    for the domain).
    """
    if not 0 <= count <= MAX_OBSTACLES:
        raise OutOfRange(f"obstacle count {count} outside [0, {MAX_OBSTACLES}]")
    if max_attempts < 1:
        raise OutOfRange("max_attempts must be >= 1")
    lo, hi = size_range
    if not 0 < lo <= hi:
        raise OutOfRange(f"invalid size_range {size_range}")

    rng = stream(seed, "obstacles")
    placed: list[Rect] = []
    rejections = 0
    while len(placed) < count:
        side = float(rng.uniform(lo, hi))
        x_max = domain[0] - margin_min - side
        y_max = domain[1] - margin_min - side
        if x_max < margin_min or y_max < margin_min:
            rejections += 1  # this size cannot fit at all
        else:
            cand = Rect(
                float(rng.uniform(margin_min, x_max)),
                float(rng.uniform(margin_min, y_max)),
                side,
                side,
            )
            if all(cand.separation_ok(r, gap_min) for r in placed):
                placed.append(cand)
                continue
            rejections += 1
        if rejections >= max_attempts:
            raise PlacementExhausted(
                f"placed {len(placed)}/{count} obstacles after "
                f"{rejections} rejections"
            )
    return ObstacleSet(tuple(placed), int(seed), (float(domain[0]), float(domain[1])))


def rasterize_mask(obs: ObstacleSet, grid_dims: tuple[int, int]) -> BinaryMask:
    """Block every cell whose center lies inside some obstacle rectangle."""
    h, w = grid_dims
    if h < 8 or w < 8:
        raise OutOfRange(f"grid_dims {grid_dims} below the (8, 8) minimum")
    lx, ly = obs.domain_size
    dx, dy = lx / w, ly / h
    cx = (np.arange(w) + 0.5) * dx
    cy = (np.arange(h) + 0.5) * dy
    fluid = np.ones((h, w), dtype=bool)
    for r in obs.obstacles:
        in_x = (cx >= r.x) & (cx <= r.x2)
        in_y = (cy >= r.y) & (cy <= r.y2)
        fluid &= ~(in_y[:, None] & in_x[None, :])
    return BinaryMask(fluid, (dx, dy), (lx, ly))


def compute_sdf(mask: BinaryMask) -> SdfField:
    """Exact Euclidean distance transform of the mask, signed by phase.

    Distances run from cell centers to the rasterized obstacle
    interface; the transform to the nearest opposite-phase center is
    shifted inward by half the smaller cell dimension, which keeps the
    result within half a cell diagonal of the true interface distance.
    """
    fluid = mask.grid
    if not fluid.any():
        raise AllSolid("mask has no fluid cell")
    dx, dy = mask.cell_size
    half = 0.5 * min(dx, dy)
    cap = float(np.hypot(*mask.domain_size))
    if fluid.all():
        return SdfField(np.full(fluid.shape, cap), mask.cell_size)
    # sampling order is (row, col) = (dy, dx)
    d_fluid = ndimage.distance_transform_edt(fluid, sampling=(dy, dx))
    d_solid = ndimage.distance_transform_edt(~fluid, sampling=(dy, dx))
    sdf = np.where(fluid, np.minimum(d_fluid - half, cap), -(d_solid - half))
    return SdfField(sdf, mask.cell_size)


def classify_geometry_difficulty(obstacle_count: int) -> DifficultyTier:
    """0 obstacles -> easy, 1 -> medium, 2..10 -> hard."""
    if not 0 <= obstacle_count <= MAX_OBSTACLES:
        raise OutOfRange(
            f"obstacle count {obstacle_count} outside [0, {MAX_OBSTACLES}]"
        )
    if obstacle_count == 0:
        level = Tier.EASY
    elif obstacle_count == 1:
        level = Tier.MEDIUM
    else:
        level = Tier.HARD
    return DifficultyTier(level, Axis.GEOMETRY)
