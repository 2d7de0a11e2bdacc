"""Precipitation metrics: CSI and cumulative CSI, raw and active-area MAE,
center-of-mass displacement, differential trend, and the shifted-copy MAE
curve used to show pixel metrics ignoring misalignment.

Pixel coordinates: x is the column index j, y the row index i, origin at
the top-left pixel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ..core import PrecipEvent, PredictionSet
from ..sampling import is_responsive

log = logging.getLogger(__name__)

CSI_THRESHOLDS = (16.0, 32.0, 64.0)
CUCSI_BINS = 30
CUCSI_STEP = 0.015
ACTIVE_THRESHOLD = 5.0


class ZeroMassError(ValueError):
    def __init__(self, which: str):
        self.which = which
        super().__init__(f"{which} frame has zero total intensity; center of mass undefined")


def _same_shape(gt, pd) -> tuple[np.ndarray, np.ndarray]:
    gt, pd = np.asarray(gt, dtype=np.float64), np.asarray(pd, dtype=np.float64)
    if gt.shape != pd.shape:
        raise ValueError(f"shape mismatch: ground truth {gt.shape} vs prediction {pd.shape}")
    return gt, pd


# ---------------------------------------------------------------------------
# CSI
# ---------------------------------------------------------------------------


def csi_counts(gt_frame, pd_frame, T: float) -> tuple[int, int, int]:
    """(hits A, misses B, false alarms C) at threshold T."""
    gt, pd = _same_shape(gt_frame, pd_frame)
    g, p = gt >= T, pd >= T
    return int(np.count_nonzero(g & p)), int(np.count_nonzero(g & ~p)), int(np.count_nonzero(~g & p))


def csi(gt_frame, pd_frame, T: float) -> float | None:
    """A / (A + B + C), or None when no pixel reaches T in either frame."""
    a, b, c = csi_counts(gt_frame, pd_frame, T)
    total = a + b + c
    return a / total if total else None


def csi_avg(gt_frame, pd_frame, thresholds: Sequence[float] = CSI_THRESHOLDS) -> float | None:
    """Mean CSI over the thresholds; None if any component is undefined."""
    parts = [csi(gt_frame, pd_frame, t) for t in thresholds]
    if any(v is None for v in parts):
        return None
    return sum(parts) / len(parts)


@dataclass
class CuCsiGrid:
    T: float
    N: int
    s: float
    counts: np.ndarray  # (lead frames, N) integer
    considered: int
    event_ids: list[int] = field(default_factory=list)

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "N": self.N,
            "s": self.s,
            "counts": self.counts.tolist(),
            "considered": self.considered,
            "event_ids": list(self.event_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CuCsiGrid":
        return cls(float(d["T"]), int(d["N"]), float(d["s"]), np.asarray(d["counts"], dtype=np.int64),
                   int(d["considered"]), [int(i) for i in d.get("event_ids", [])])


def csi_bin(value: float, s: float, N: int) -> int:
    """Index j with value in [s*j, s*(j+1)); values past the grid go to j = N-1."""
    j = int(math.floor(value / s))
    while j > 0 and value < s * j:
        j -= 1
    while value >= s * (j + 1):
        j += 1
    return min(j, N - 1)


def cucsi(
    events: Sequence[PrecipEvent],
    preds: PredictionSet,
    T: float,
    N: int = CUCSI_BINS,
    s: float = CUCSI_STEP,
    lead_count: int | None = None,
) -> CuCsiGrid:
    """Per-lead histogram of CSI_T over the events responsive at T.

    Events are re-filtered here, so passing the unfiltered test set is fine.
    When N*s < 1, scores >= N*s (including perfect frames) land in the top bin.
    """
    if N < 1 or s <= 0:
        raise ValueError("CuCSI needs N >= 1 and s > 0")
    if N * s < 1:
        log.warning("CuCSI grid covers CSI in [0, %g); higher scores are clamped into bin %d", N * s, N - 1)
    if lead_count is None:
        lead_count = events[0].output_len if events else 20
    counts = np.zeros((lead_count, N), dtype=np.int64)
    kept = []
    for ev in sorted(events, key=lambda e: e.event_id):
        if ev.output_len != lead_count:
            raise ValueError(f"event {ev.event_id} has {ev.output_len} lead frames, grid has {lead_count}")
        pd = np.asarray(preds[ev.event_id])
        if not is_responsive(ev, pd, T):
            continue
        kept.append(ev.event_id)
        for i in range(lead_count):
            counts[i, csi_bin(csi(ev.targets[i], pd[i], T), s, N)] += 1
    return CuCsiGrid(T, N, s, counts, len(kept), kept)


# ---------------------------------------------------------------------------
# MAE
# ---------------------------------------------------------------------------


def mae(gt_frame, pd_frame) -> float:
    gt, pd = _same_shape(gt_frame, pd_frame)
    return float(np.abs(gt - pd).mean())


def active_area_mae(gt_frame, pd_frame, T_active: float = ACTIVE_THRESHOLD, mask: str = "gt") -> float | None:
    """MAE over pixels where the ground truth reaches T_active.

    ``mask="union"`` also counts pixels where only the prediction is active.
    Returns None for an empty mask.
    """
    gt, pd = _same_shape(gt_frame, pd_frame)
    if mask == "gt":
        m = gt >= T_active
    elif mask == "union":
        m = (gt >= T_active) | (pd >= T_active)
    else:
        raise ValueError(f"unknown active mask {mask!r}")
    if not m.any():
        return None
    return float(np.abs(gt[m] - pd[m]).mean())


def mean_intensity(frame) -> float:
    return float(np.asarray(frame, dtype=np.float64).mean())


# ---------------------------------------------------------------------------
# center of mass
# ---------------------------------------------------------------------------


def center_of_mass(frame, which: str = "frame") -> tuple[float, float]:
    """(x_c, y_c) = intensity-weighted mean (column, row)."""
    w = np.asarray(frame, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise ZeroMassError(which)
    rows = np.arange(w.shape[0], dtype=np.float64)
    cols = np.arange(w.shape[1], dtype=np.float64)
    x_c = float(w.sum(axis=0) @ cols / total)
    y_c = float(w.sum(axis=1) @ rows / total)
    return x_c, y_c


class ComDisplacement(NamedTuple):
    x_gt: float
    y_gt: float
    x_pd: float
    y_pd: float
    delta_r: float


def center_of_mass_displacement(gt_frame, pd_frame) -> ComDisplacement:
    gt, pd = _same_shape(gt_frame, pd_frame)
    xg, yg = center_of_mass(gt, "ground truth")
    xp, yp = center_of_mass(pd, "prediction")
    return ComDisplacement(xg, yg, xp, yp, math.hypot(xg - xp, yg - yp))


# ---------------------------------------------------------------------------
# differential trend
# ---------------------------------------------------------------------------


def differential_trend(event: PrecipEvent, pred_frames, i: int, j: int) -> tuple[float, float]:
    """Normalized mass change from frame i to frame j, for truth and prediction.

    Both use the ground-truth frame i as offset. ``i`` indexes the event's
    full frame sequence; ``j`` must be an output frame (j >= input_len) and
    the prediction for it is ``pred_frames[j - input_len]``.
    """
    T, H, W = event.shape
    if not 0 <= i < T:
        raise IndexError(f"start frame {i} outside [0, {T})")
    if not event.input_len <= j < T:
        raise IndexError(f"end frame {j} is not an output frame [{event.input_len}, {T})")
    pd = np.asarray(pred_frames, dtype=np.float64)
    k = j - event.input_len
    if k >= len(pd):
        raise IndexError(f"no prediction for output frame {j}")
    area = H * W
    base = math.fsum(event.frames[i].ravel())
    diff_gt = (math.fsum(event.frames[j].ravel()) - base) / area
    diff_pd = (math.fsum(pd[k].ravel()) - base) / area
    return diff_gt, diff_pd


# ---------------------------------------------------------------------------
# misalignment diagnostic
# ---------------------------------------------------------------------------


def shift_frame(frame, dx: int, dy: int) -> np.ndarray:
    """Translate by dx columns and dy rows, filling uncovered pixels with 0."""
    f = np.asarray(frame, dtype=np.float64)
    H, W = f.shape
    out = np.zeros_like(f)
    dx, dy = int(dx), int(dy)
    if abs(dx) >= W or abs(dy) >= H:
        return out
    src_r = slice(max(0, -dy), H - max(0, dy))
    src_c = slice(max(0, -dx), W - max(0, dx))
    dst_r = slice(max(0, dy), H - max(0, -dy))
    dst_c = slice(max(0, dx), W - max(0, -dx))
    out[dst_r, dst_c] = f[src_r, src_c]
    return out


def displacement_mae_curve(frame, displacements: Sequence[tuple[int, int]]) -> list[tuple[float, float]]:
    """(|d|, MAE(frame, frame shifted by d)) for each integer displacement d = (dx, dy)."""
    f = np.asarray(frame, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty frame")
    return [(math.hypot(dx, dy), mae(f, shift_frame(f, dx, dy))) for dx, dy in displacements]
