"""Trajectory storage: the NST1 binary format, centering, and resampling.

A trajectory is a (T, H, W, 6) float32 tensor with channels
(u, v, p, re_hat, mask, sdf), cell-centered, row j = 0 at the bottom of
the domain. NST1 files carry a 128-byte self-describing header (magic,
shape, flow kind, Re, seed, schedule) followed by the raw payload,
channel-fastest. The header is always little-endian; an endianness tag
records the payload byte order and readers byte-swap transparently.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CorruptPayload,
    InvalidShape,
    IoError,
    VersionMismatch,
)
from .geometry import BinaryMask, compute_sdf

__all__ = [
    "CHANNELS",
    "GridField",
    "Trajectory",
    "TrajectoryMeta",
    "write_trajectory",
    "read_trajectory",
    "export_raw",
    "center_faces",
    "resample_field",
    "resample_to_grid",
    "resample_mask_nearest",
    "resample_trajectory",
]

CHANNELS = ("u", "v", "p", "re_hat", "mask", "sdf")

MAGIC = b"NST1"
VERSION = 1
HEADER_SIZE = 128
_HEADER_FMT = "<4sHHB3xHHHH4sQddddH2x48s12x"
assert struct.calcsize(_HEADER_FMT) == HEADER_SIZE


@dataclass
class TrajectoryMeta:
    kind: str  # "FPO" or "LDC"
    re: float
    seed: int
    t_end: float
    write_interval: float
    n_frames: int = 20
    gamma: float | None = None
    # run diagnostics (timings, divergence history); never serialized
    extras: dict = field(default_factory=dict)

    @property
    def sim_id(self) -> str:
        return f"{self.kind}-{self.seed:016x}"


@dataclass
class GridField:
    """One cell-centered scalar field on a uniform grid."""

    values: np.ndarray  # (H, W)
    extent: tuple[float, float]  # (Lx, Ly), meters

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise InvalidShape("grid field contains non-finite values")


@dataclass
class Trajectory:
    frames: np.ndarray  # (T, H, W, C) float32
    meta: TrajectoryMeta

    @property
    def shape(self) -> tuple[int, ...]:
        return self.frames.shape

    def channel(self, name: str) -> np.ndarray:
        return self.frames[..., CHANNELS.index(name)]


def _validate_frames(frames: np.ndarray) -> None:
    if frames.ndim != 4:
        raise InvalidShape(f"frames must be (T, H, W, C), got {frames.shape}")
    t, h, w, c = frames.shape
    if t < 1 or h < 1 or w < 1:
        raise InvalidShape(f"zero-length dimension in {frames.shape}")
    if c != len(CHANNELS):
        raise InvalidShape(f"expected {len(CHANNELS)} channels, got {c}")


def write_trajectory(traj: Trajectory, path: Path | str) -> None:
    """Write an NST1 file; the read side reproduces it bit-for-bit."""
    _validate_frames(traj.frames)
    t, h, w, c = traj.frames.shape
    m = traj.meta
    gamma = float("nan") if m.gamma is None else float(m.gamma)
    names = b"".join(n.encode("ascii").ljust(8, b"\0") for n in CHANNELS)
    header = struct.pack(
        _HEADER_FMT, MAGIC, VERSION, HEADER_SIZE, 0,
        t, h, w, c,
        m.kind.encode("ascii").ljust(4, b"\0"),
        int(m.seed) & (2**64 - 1),
        float(m.re), float(m.t_end), float(m.write_interval), gamma,
        int(m.n_frames), names,
    )
    payload = np.ascontiguousarray(traj.frames, dtype="<f4").tobytes()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(header)
            f.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def read_trajectory(path: Path | str) -> Trajectory:
    """Read and validate an NST1 file (shape, finiteness, byte order)."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise BadMagic(f"{path} is not an NST1 file")
    (magic, version, header_size, endian, t, h, w, c, kind, seed,
     re, t_end, write_interval, gamma, n_frames,
     names) = struct.unpack(_HEADER_FMT, raw[:HEADER_SIZE])
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    expected = header_size + t * h * w * c * 4
    if len(raw) != expected:
        raise CorruptPayload(
            f"{path}: {len(raw)} bytes, expected {expected}"
        )
    dtype = ">f4" if endian == 1 else "<f4"
    flat = np.frombuffer(raw[header_size:], dtype=dtype)
    frames = flat.astype(np.float32).reshape(t, h, w, c)
    if not np.isfinite(frames).all():
        raise CorruptPayload(f"{path}: non-finite payload values")
    meta = TrajectoryMeta(
        kind=kind.rstrip(b"\0").decode("ascii"),
        re=re,
        seed=seed,
        t_end=t_end,
        write_interval=write_interval,
        n_frames=n_frames,
        gamma=None if np.isnan(gamma) else gamma,
    )
    return Trajectory(frames, meta)


def export_raw(traj: Trajectory, prefix: Path | str) -> tuple[Path, Path]:
    """Headerless little-endian float32 dump plus a JSON sidecar."""
    prefix = Path(prefix)
    raw_path = prefix.with_suffix(".f32")
    json_path = prefix.with_suffix(".json")
    raw_path.write_bytes(np.ascontiguousarray(traj.frames, dtype="<f4").tobytes())
    m = traj.meta
    sidecar = {
        "shape": list(traj.frames.shape),
        "dtype": "<f4",
        "order": "C",
        "channels": list(CHANNELS),
        "kind": m.kind,
        "re": m.re,
        "seed": m.seed,
        "t_end": m.t_end,
        "write_interval": m.write_interval,
        "n_frames": m.n_frames,
        "gamma": m.gamma,
    }
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return raw_path, json_path


def center_faces(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average staggered face velocities to cell centers.

    u has shape (H, W+1), v has shape (H+1, W); both outputs are (H, W).
    """
    u_cc = 0.5 * (u[:, :-1] + u[:, 1:])
    v_cc = 0.5 * (v[:-1, :] + v[1:, :])
    return u_cc, v_cc


def _axis_weights(n_src: int, n_tgt: int) -> tuple[np.ndarray, np.ndarray]:
    """Bracketing indices and weights mapping target centers into source
    index space; edge weights extrapolate linearly so affine fields are
    reproduced exactly."""
    s = (np.arange(n_tgt) + 0.5) * (n_src / n_tgt) - 0.5
    i0 = np.clip(np.floor(s).astype(int), 0, max(n_src - 2, 0))
    w = s - i0
    return i0, w


def resample_field(values: np.ndarray, target_dims: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling of a cell-centered field to a new grid.

    Identity when the dims match; exact on fields affine in (x, y).
    """
    h_s, w_s = values.shape
    h_t, w_t = target_dims
    if h_t < 2 or w_t < 2:
        raise InvalidShape(f"target dims {target_dims} below (2, 2)")
    if (h_s, w_s) == (h_t, w_t):
        return values.copy()
    j0, wy = _axis_weights(h_s, h_t)
    i0, wx = _axis_weights(w_s, w_t)
    if h_s == 1:
        rows = values[np.zeros(h_t, dtype=int), :]
    else:
        rows = values[j0, :] * (1.0 - wy)[:, None] + values[j0 + 1, :] * wy[:, None]
    if w_s == 1:
        return rows[:, np.zeros(w_t, dtype=int)]
    return rows[:, i0] * (1.0 - wx)[None, :] + rows[:, i0 + 1] * wx[None, :]


def resample_to_grid(field: GridField, target_dims: tuple[int, int]) -> GridField:
    """Bilinear resampling of a GridField onto target_dims cell centers."""
    return GridField(resample_field(field.values, target_dims), field.extent)


def resample_mask_nearest(values: np.ndarray, target_dims: tuple[int, int]) -> np.ndarray:
    h_s, w_s = values.shape
    h_t, w_t = target_dims
    sj = np.clip(np.round((np.arange(h_t) + 0.5) * h_s / h_t - 0.5).astype(int), 0, h_s - 1)
    si = np.clip(np.round((np.arange(w_t) + 0.5) * w_s / w_t - 0.5).astype(int), 0, w_s - 1)
    return values[sj[:, None], si[None, :]]


def resample_trajectory(
    traj: Trajectory,
    target_dims: tuple[int, int],
    extent: tuple[float, float] = (2.0, 2.0),
) -> Trajectory:
    """Resample every frame: bilinear for fields, nearest for the mask,
    and the signed distance field recomputed at the target resolution."""
    t, h, w, c = traj.frames.shape
    h_t, w_t = target_dims
    if (h, w) == (h_t, w_t):
        return Trajectory(traj.frames.copy(), traj.meta)
    mask_t = resample_mask_nearest(traj.frames[0, :, :, CHANNELS.index("mask")],
                                   target_dims)
    lx, ly = extent
    bm = BinaryMask(mask_t > 0.5, (lx / w_t, ly / h_t), (lx, ly))
    sdf_t = compute_sdf(bm).grid.astype(np.float32)
    out = np.empty((t, h_t, w_t, c), dtype=np.float32)
    for k in range(t):
        for ch in ("u", "v", "p"):
            idx = CHANNELS.index(ch)
            out[k, :, :, idx] = resample_field(
                traj.frames[k, :, :, idx].astype(np.float64), target_dims
            ).astype(np.float32)
        out[k, :, :, CHANNELS.index("re_hat")] = traj.frames[k, 0, 0, CHANNELS.index("re_hat")]
        out[k, :, :, CHANNELS.index("mask")] = mask_t
        out[k, :, :, CHANNELS.index("sdf")] = sdf_t
    return Trajectory(out, traj.meta)
