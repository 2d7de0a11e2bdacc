"""Energy and force errors for molecular frames, with structural breakdowns."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import MetricReport, MolecularFrame, PredictionSet


class UnlabeledFrameError(ValueError):
    pass


def _check(frames: Sequence[MolecularFrame], preds: PredictionSet, need_forces: bool = True) -> list[MolecularFrame]:
    frames = sorted(frames, key=lambda fr: fr.time_index)
    for fr in frames:
        if fr.energy is None or (need_forces and fr.forces is None):
            raise UnlabeledFrameError(f"frame {fr.time_index} has no labels")
        if fr.time_index not in preds:
            raise KeyError(f"no prediction for frame {fr.time_index}")
        if need_forces and preds[fr.time_index].forces.shape != fr.forces.shape:
            raise ValueError(
                f"frame {fr.time_index}: predicted forces {preds[fr.time_index].forces.shape} vs {fr.forces.shape}"
            )
    return frames


def force_mae(
    frames: Sequence[MolecularFrame], preds: PredictionSet, group_by_species: bool = True
) -> MetricReport:
    """Per-atom force MAE, averaged over atoms and the three components.

    ``per_sample`` holds each frame's MAE; ``extra`` holds the overall value
    and, when requested, the per-species MAE and atom counts.
    """
    frames = _check(frames, preds)
    per_frame: dict[int, float] = {}
    sums: dict[int, list[float]] = defaultdict(list)
    counts: dict[int, int] = defaultdict(int)
    all_err: list[float] = []
    for fr in frames:
        err = np.abs(fr.forces - preds[fr.time_index].forces)
        per_frame[fr.time_index] = math.fsum(err.ravel()) / err.size
        all_err.extend(err.ravel())
        for z, row in zip(fr.species, err):
            sums[z].extend(row)
            counts[z] += 1
    extra: dict = {"overall": math.fsum(all_err) / len(all_err), "n_atoms_total": len(all_err) // 3}
    if group_by_species:
        extra["per_species"] = {z: math.fsum(sums[z]) / (3 * counts[z]) for z in sorted(sums)}
        extra["atom_counts"] = {z: counts[z] for z in sorted(counts)}
    return MetricReport("force_mae", per_frame, params={"group_by_species": group_by_species}, extra=extra)


def energy_error_series(frames: Sequence[MolecularFrame], preds: PredictionSet, per_atom: bool = False) -> MetricReport:
    """Signed energy error (predicted - true) per frame, ordered by time_index."""
    frames = _check(frames, preds, need_forces=False)
    series = {}
    for fr in frames:
        err = preds[fr.time_index].energy - fr.energy
        series[fr.time_index] = err / fr.n_atoms if per_atom else err
    mae = math.fsum(abs(v) for v in series.values()) / len(series)
    return MetricReport("energy_error", series, params={"per_atom": per_atom}, extra={"mae": mae})


def energy_mae(frames: Sequence[MolecularFrame], preds: PredictionSet, per_atom: bool = True) -> MetricReport:
    signed = energy_error_series(frames, preds, per_atom)
    return MetricReport("energy_mae", {k: abs(v) for k, v in signed.per_sample.items()}, params=signed.params)


def flag_excursions(values: Sequence[float], n_sigma: float = 3.0, max_iter: int = 100) -> np.ndarray:
    """Iterative sigma clipping: flag values beyond ``n_sigma`` standard
    deviations of the mean of the remaining (unflagged) values."""
    x = np.asarray(values, dtype=np.float64)
    flagged = np.zeros(len(x), dtype=bool)
    for _ in range(max_iter):
        rest = x[~flagged]
        if len(rest) < 2:
            break
        mu, sd = rest.mean(), rest.std()
        new = np.abs(x - mu) > n_sigma * sd if sd > 0 else x != mu
        if np.array_equal(new, flagged):
            break
        flagged = new
    return flagged


@dataclass(frozen=True)
class ErrorPair:
    sample_id: int
    energy_error: float
    force_error: float


def error_scatter(frames: Sequence[MolecularFrame], preds: PredictionSet) -> list[ErrorPair]:
    """(|dE|, mean |dF|) per frame; the force term uses the same componentwise mean as force_mae."""
    out = []
    for fr in _check(frames, preds):
        p = preds[fr.time_index]
        err = np.abs(fr.forces - p.forces)
        out.append(ErrorPair(fr.time_index, abs(p.energy - fr.energy), math.fsum(err.ravel()) / err.size))
    return out
