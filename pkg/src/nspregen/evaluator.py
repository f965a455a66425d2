"""Global relative-L1 scoring of predicted trajectories.

The score is a single ratio over all trajectories and frames,

    nmae = sum_i sum_t ||y - yhat||_1 / sum_i sum_t ||y||_1,

not a mean of per-trajectory ratios. Scored channels default to the
physical fields (u, v, p); the constant geometry/physics channels are
model inputs, not predictions. Sums accumulate in float64 even though
payloads are float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, UnpairedTrajectory, ZeroDenominator
from .trajio import CHANNELS, Trajectory

__all__ = ["EvalReport", "DEFAULT_CHANNELS", "nmae", "per_channel_errors", "pair_by_id"]

DEFAULT_CHANNELS = ("u", "v", "p")


@dataclass
class EvalReport:
    nmae: float
    numerator: float
    denominator: float
    per_channel: dict[str, float]
    per_trajectory: list[dict]  # {"sim_id", "numerator", "denominator"}
    n_trajectories: int
    n_frames: int
    channels: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "nmae": self.nmae,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "per_channel": self.per_channel,
            "per_trajectory": self.per_trajectory,
            "n_trajectories": self.n_trajectories,
            "n_frames": self.n_frames,
            "channels": list(self.channels),
        }


def _channel_indices(channels) -> list[int]:
    try:
        return [CHANNELS.index(c) for c in channels]
    except ValueError as exc:
        raise ValueError(f"unknown channel in {channels}") from exc


def nmae(
    pred: list[Trajectory],
    truth: list[Trajectory],
    channels=DEFAULT_CHANNELS,
) -> EvalReport:
    """Score paired predictions against ground truth.

    Pairs are matched positionally here; use `pair_by_id` to align two
    unordered collections first. Every stored frame enters the score
    (stored frames start at t = 1; the initial condition is never
    written, so nothing needs excluding).
    """
    if len(pred) != len(truth):
        raise UnpairedTrajectory(
            f"{len(pred)} predictions vs {len(truth)} references"
        )
    if not pred:
        raise UnpairedTrajectory("empty trajectory lists")
    idx = _channel_indices(channels)
    num_total = 0.0
    den_total = 0.0
    ch_num = np.zeros(len(idx))
    ch_den = np.zeros(len(idx))
    per_traj = []
    n_frames = truth[0].frames.shape[0]
    for pr, tr in zip(pred, truth):
        if pr.frames.shape != tr.frames.shape:
            raise ShapeMismatch(
                f"{pr.meta.sim_id}: {pr.frames.shape} vs {tr.frames.shape}"
            )
        diff = np.abs(pr.frames[..., idx].astype(np.float64)
                      - tr.frames[..., idx].astype(np.float64))
        ref = np.abs(tr.frames[..., idx].astype(np.float64))
        num = float(diff.sum())
        den = float(ref.sum())
        ch_num += diff.sum(axis=(0, 1, 2))
        ch_den += ref.sum(axis=(0, 1, 2))
        num_total += num
        den_total += den
        per_traj.append({
            "sim_id": tr.meta.sim_id,
            "numerator": num,
            "denominator": den,
        })
    if den_total == 0.0:
        raise ZeroDenominator("all reference fields are identically zero")
    per_channel = {}
    for k, c in enumerate(channels):
        per_channel[c] = float(ch_num[k] / ch_den[k]) if ch_den[k] > 0 else float("nan")
    return EvalReport(
        nmae=num_total / den_total,
        numerator=num_total,
        denominator=den_total,
        per_channel=per_channel,
        per_trajectory=per_traj,
        n_trajectories=len(truth),
        n_frames=n_frames,
        channels=tuple(channels),
    )


def per_channel_errors(
    pred: list[Trajectory],
    truth: list[Trajectory],
    channels=DEFAULT_CHANNELS,
) -> dict[str, float]:
    """The nmae ratio computed channel by channel."""
    return nmae(pred, truth, channels).per_channel


def pair_by_id(
    pred: list[Trajectory],
    truth: list[Trajectory],
) -> tuple[list[Trajectory], list[Trajectory]]:
    """Align two collections by the (kind, seed) id in their headers."""
    pred_by_id = {t.meta.sim_id: t for t in pred}
    truth_by_id = {t.meta.sim_id: t for t in truth}
    if set(pred_by_id) != set(truth_by_id):
        missing = set(truth_by_id) ^ set(pred_by_id)
        raise UnpairedTrajectory(f"unmatched trajectory ids: {sorted(missing)[:5]}")
    ids = sorted(truth_by_id)
    return [pred_by_id[i] for i in ids], [truth_by_id[i] for i in ids]
