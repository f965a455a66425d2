"""Reynolds-number sampling, boundary speeds, and run scheduling.

All quantities are SI. The channel/cavity geometry is fixed by
FluidParams: characteristic length L and height H (both 2 m by
default) and kinematic viscosity nu = 1.5e-5 m^2/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import OutOfDomain, OutOfRange, UnbandedRe
from .geometry import Axis, DifficultyTier, Tier
from .rng import stream

__all__ = [
    "FlowKind",
    "FluidParams",
    "ReBand",
    "Schedule",
    "BoundarySetup",
    "RE_BANDS",
    "GAMMA_TABLE",
    "N_FRAMES",
    "sample_reynolds",
    "umax_from_re_fpo",
    "inlet_profile",
    "lid_speed_from_re",
    "schedule_end_time",
    "classify_physics_difficulty",
]

N_FRAMES = 20


class FlowKind(str, Enum):
    FPO = "FPO"  # channel flow past obstacles: inlet, outlet, no-slip walls
    LDC = "LDC"  # lid-driven cavity: three no-slip walls, moving top lid


@dataclass(frozen=True)
class FluidParams:
    nu: float = 1.5e-5  # kinematic viscosity, m^2/s
    length: float = 2.0  # characteristic length L, m
    height: float = 2.0  # channel height H, m

    def __post_init__(self):
        if self.nu <= 0 or self.length <= 0 or self.height <= 0:
            raise OutOfRange("fluid parameters must be positive")


@dataclass(frozen=True)
class ReBand:
    """Truncated-Gaussian Reynolds band with closed support [lo, hi]."""

    lo: float
    hi: float
    mean: float
    sigma: float

    def __post_init__(self):
        if not (0 < self.lo < self.hi and self.lo <= self.mean <= self.hi
                and self.sigma > 0):
            raise OutOfRange(f"invalid ReBand {self}")

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "mean": self.mean,
                "sigma": self.sigma}

    @classmethod
    def from_json(cls, d: dict) -> "ReBand":
        return cls(float(d["lo"]), float(d["hi"]), float(d["mean"]),
                   float(d["sigma"]))


def _midband(lo: float, hi: float) -> ReBand:
    # declared default: mean at the band midpoint, sigma = width / 4
    return ReBand(lo, hi, 0.5 * (lo + hi), (hi - lo) / 4.0)


RE_BANDS: dict[Tier, ReBand] = {
    Tier.EASY: _midband(100.0, 1000.0),
    Tier.MEDIUM: _midband(2000.0, 4000.0),
    Tier.HARD: _midband(8000.0, 10000.0),
}

#: full-support generation band: N(5000, 2000^2) truncated to [100, 10000]
BASELINE_BAND = ReBand(100.0, 10000.0, 5000.0, 2000.0)


@dataclass(frozen=True)
class Schedule:
    """Simulation end time and output cadence for one run."""

    t_end: float  # seconds
    write_interval: float  # seconds
    n_frames: int = N_FRAMES
    gamma: float | None = None  # end-time multiplier; None on the fixed branch


@dataclass(frozen=True)
class BoundarySetup:
    """Boundary speed consistent with a target Reynolds number.

    speed is the FPO peak inlet velocity (u_max) or the LDC lid speed,
    depending on kind. speed = 0 is allowed for zero-forcing control
    cases (the scheduling Re must still be supplied).
    """

    kind: FlowKind
    speed: float  # m/s
    re: float

    def __post_init__(self):
        if self.speed < 0 or self.re <= 0:
            raise OutOfRange("boundary speed must be >= 0 and Re positive")


def sample_reynolds(band: ReBand, seed: int) -> float:
    """Draw one Re from the band's truncated Gaussian.

    Rejection from the untruncated normal; acceptance stays near 40% or
    better for every declared band, and the draw is a pure function of
    (band, seed).
    """
    rng = stream(seed, "reynolds")
    while True:
        re = band.mean + band.sigma * float(rng.standard_normal())
        if band.lo <= re <= band.hi:
            return re


def umax_from_re_fpo(re: float, p: FluidParams) -> float:
    """Peak inlet speed for a parabolic profile hitting the target Re.

    Re = U_avg * L / nu with U_avg = (2/3) U_max, so
    U_max = (3/2) Re nu / L.
    """
    if re <= 0:
        raise OutOfRange("Re must be positive")
    return 1.5 * re * p.nu / p.length


def inlet_profile(u_max: float, height: float, y) -> float:
    """Plane Poiseuille profile u(y) = 4 u_max y (H - y) / H^2."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0) or np.any(y_arr > height):
        raise OutOfDomain(f"y outside [0, {height}]")
    u = 4.0 * u_max * y_arr * (height - y_arr) / height**2
    return float(u) if np.isscalar(y) or y_arr.ndim == 0 else u


def lid_speed_from_re(re: float, p: FluidParams) -> float:
    """LDC lid speed: U_lid = Re nu / L."""
    if re <= 0:
        raise OutOfRange("Re must be positive")
    return re * p.nu / p.length


# (lo, hi, gamma) rows; shared endpoints resolve to the lower row.
GAMMA_TABLE: tuple[tuple[float, float, float], ...] = (
    (100.0, 200.0, 1.0),
    (200.0, 300.0, 2.0),
    (300.0, 400.0, 3.0),
    (400.0, 500.0, 4.0),
    (500.0, 1000.0, 5.0),
    (1000.0, 2500.0, 10.0),
    (2500.0, 4000.0, 20.0),
    (4000.0, 5000.0, 30.0),
    (5000.0, 10000.0, 40.0),
)

#: fixed end time for creeping flows with Re < 100 (seconds)
T_END_LOW_RE = 2700.0


def schedule_end_time(re: float, p: FluidParams) -> Schedule:
    """Re-dependent end time with 20 evenly spaced output frames.

    Below Re = 100 the run lasts a fixed 2700 s. Otherwise the end time
    is gamma(Re) times the characteristic time t_nd = L^2 / (nu Re),
    rounded up to the nearest hundred seconds.
    """
    if not 10.0 <= re <= 10000.0:
        raise OutOfRange(f"Re {re} outside [10, 10000]")
    if re < 100.0:
        t_end = T_END_LOW_RE
        gamma = None
    else:
        gamma = None
        for lo, hi, g in GAMMA_TABLE:
            if lo <= re <= hi:
                gamma = g
                break
        assert gamma is not None
        t_nd = p.length**2 / (p.nu * re)
        t_end = 100.0 * math.ceil(gamma * t_nd / 100.0)
    return Schedule(t_end=t_end, write_interval=t_end / N_FRAMES, gamma=gamma)


def classify_physics_difficulty(re: float) -> DifficultyTier:
    """Band membership: [100,1000] easy, [2000,4000] medium, [8000,10000] hard.

    Endpoints are closed on both sides; anything in a gap (or outside
    all bands) raises UnbandedRe rather than silently classifying.
    """
    if re <= 0:
        raise OutOfRange("Re must be positive")
    for tier, band in RE_BANDS.items():
        if band.lo <= re <= band.hi:
            return DifficultyTier(tier, Axis.PHYSICS)
    raise UnbandedRe(f"Re {re} falls outside every declared band")
