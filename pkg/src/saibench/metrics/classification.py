"""Classification accuracy breakdowns and ROC/AUC for binary taggers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import MetricReport

DECISION_THRESHOLD = 0.5


def signal_scores(scores) -> np.ndarray:
    """Accept either per-sample signal scores or (n, 2) class-score rows."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim == 2:
        s = s[:, 1]
    if s.ndim != 1:
        raise ValueError(f"scores must be 1-D or (n, 2), got shape {np.shape(scores)}")
    return s


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = signal_scores(scores)
    y = np.asarray(labels)
    if len(s) == 0:
        raise ValueError("no samples")
    if len(s) != len(y):
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if np.any(~np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise ValueError("scores must lie in [0, 1]")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(int)


def classification_metrics(scores, labels, ids: Sequence[int] | None = None, threshold: float = DECISION_THRESHOLD) -> MetricReport:
    """Overall, signal (label 1) and background (label 0) accuracy.

    A sample is called signal when its score is >= ``threshold``. A class
    absent from ``labels`` gets ``None`` accuracy rather than 0.
    """
    s, y = _validate(scores, labels)
    ids = list(range(len(s))) if ids is None else [int(i) for i in ids]
    pred = (s >= threshold).astype(int)
    correct = pred == y
    sig, bkg = y == 1, y == 0
    extra = {
        "accuracy": float(correct.mean()),
        "signal_accuracy": float(correct[sig].mean()) if sig.any() else None,
        "background_accuracy": float(correct[bkg].mean()) if bkg.any() else None,
        "signal_ratio": float(sig.mean()),
        "n": int(len(s)),
    }
    return MetricReport(
        "accuracy",
        {i: float(c) for i, c in zip(ids, correct)},
        params={"threshold": threshold},
        extra=extra,
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(scores, labels) -> RocCurve:
    """ROC by sweeping thresholds over the distinct scores, high to low.

    Tied scores move in one step, so the trapezoid area credits ties with
    one half, matching P(s+ > s-) + P(s+ = s-)/2.
    """
    s, y = _validate(scores, labels)
    n_pos, n_neg = int(y.sum()), int((1 - y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    area = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]], area)


def auc_report(scores, labels, ids: Sequence[int] | None = None) -> MetricReport:
    """AUC wrapped as a report; per-sample values are the signal scores."""
    s, y = _validate(scores, labels)
    roc = roc_auc(s, y)
    ids = list(range(len(s))) if ids is None else [int(i) for i in ids]
    return MetricReport(
        "auc",
        {i: float(v) for i, v in zip(ids, s)},
        extra={"auc": roc.auc, "labels": {i: int(l) for i, l in zip(ids, y)}},
    )
