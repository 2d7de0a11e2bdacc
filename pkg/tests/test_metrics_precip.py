from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from saibench.core import PrecipEvent, PredictionSet
from saibench.metrics import (
    CuCsiGrid,
    ZeroMassError,
    active_area_mae,
    center_of_mass,
    center_of_mass_displacement,
    csi,
    csi_avg,
    csi_bin,
    csi_counts,
    cucsi,
    differential_trend,
    displacement_mae_curve,
    mae,
    mean_intensity,
    shift_frame,
)
from saibench.metrics.precip import CSI_THRESHOLDS, CUCSI_BINS, CUCSI_STEP

frames8 = arrays(np.float64, (8, 8), elements=st.floats(0, 100))


def _csi_oracle(gt, pd, T):
    a = b = c = 0
    for g, p in zip(np.ravel(gt), np.ravel(pd)):
        if g >= T and p >= T:
            a += 1
        elif g < T and p >= T:
            b += 1
        elif g >= T and p < T:
            c += 1
    return None if a + b + c == 0 else a / (a + b + c)


def test_defaults_match_published_settings():
    assert CSI_THRESHOLDS == (16.0, 32.0, 64.0)
    assert (CUCSI_BINS, CUCSI_STEP) == (30, 0.015)


def test_csi_hand_example():
    gt = np.array([[20.0, 20.0], [0.0, 0.0]])
    pd = np.array([[20.0, 0.0], [20.0, 0.0]])
    assert csi_counts(gt, pd, 16) == (1, 1, 1)
    assert csi(gt, pd, 16) == pytest.approx(1 / 3)
    assert csi(np.zeros((2, 2)), np.zeros((2, 2)), 16) is None
    # a pixel exactly at the threshold counts as an event
    assert csi(np.array([[16.0]]), np.array([[16.0]]), 16) == 1.0


@settings(max_examples=80)
@given(frames8, frames8, st.sampled_from([16.0, 32.0, 64.0]))
def test_csi_matches_pixel_oracle(gt, pd, T):
    assert csi(gt, pd, T) == _csi_oracle(gt, pd, T)


def test_csi_avg():
    gt = np.array([[20.0, 40.0, 70.0]])
    pd = np.array([[20.0, 0.0, 70.0]])
    assert csi_avg(gt, pd) == pytest.approx((2 / 3 + 1 / 2 + 1.0) / 3)
    # undefined at T=64 makes the average undefined
    assert csi_avg(gt[:, :2], pd[:, :2]) is None


def test_csi_bin_edges():
    assert csi_bin(0.0, 0.015, 30) == 0
    assert csi_bin(0.015, 0.015, 30) == 1
    assert csi_bin(0.0149999, 0.015, 30) == 0
    assert csi_bin(0.45, 0.015, 30) == 29
    assert csi_bin(1.0, 0.015, 30) == 29
    assert csi_bin(0.99, 0.1, 10) == 9


@given(st.floats(0, 1))
def test_csi_bin_interval(v):
    j = csi_bin(v, 0.015, 30)
    assert j == 29 or 0.015 * j <= v < 0.015 * (j + 1)


def _event(eid, gt_targets):
    t = np.asarray(gt_targets, dtype=float)
    return PrecipEvent(eid, np.concatenate([np.zeros((1,) + t.shape[1:]), t]), 1, len(t))


def test_cucsi_small_grid():
    e0 = _event(0, [[[20.0, 0.0]], [[20.0, 20.0]]])
    e1 = _event(1, [[[0.0, 0.0]], [[0.0, 0.0]]])  # never responsive
    preds = PredictionSet("m", "r", 0, "precip", {
        0: np.array([[[20.0, 20.0]], [[20.0, 20.0]]]),
        1: np.zeros((2, 1, 2)),
    })
    g = cucsi([e0, e1], preds, 16, N=4, s=0.25)
    assert g.event_ids == [0] and g.considered == 1
    assert g.counts.tolist() == [[0, 0, 1, 0], [0, 0, 0, 1]]  # CSI 0.5 then 1.0 (clamped)
    assert CuCsiGrid.from_dict(g.to_dict()).counts.tolist() == g.counts.tolist()


def test_cucsi_warns_when_grid_short(caplog):
    e0 = _event(0, [[[20.0]]])
    preds = PredictionSet("m", "r", 0, "precip", {0: np.array([[[20.0]]])})
    with caplog.at_level(logging.WARNING):
        cucsi([e0], preds, 16)
    assert "clamped" in caplog.text


def test_mae_and_active_area():
    gt = np.array([[10.0, 0.0], [4.0, 6.0]])
    pd = np.array([[8.0, 2.0], [4.0, 9.0]])
    assert mae(gt, pd) == pytest.approx(7 / 4)
    assert active_area_mae(gt, pd) == pytest.approx((2 + 3) / 2)
    assert active_area_mae(gt, pd, 5, mask="union") == pytest.approx((2 + 3) / 2)
    assert active_area_mae(gt, np.full((2, 2), 7.0), 5, mask="union") == pytest.approx((3 + 7 + 3 + 1) / 4)
    assert active_area_mae(np.zeros((2, 2)), pd) is None
    with pytest.raises(ValueError):
        mae(gt, pd[:1])
    assert mean_intensity(gt) == 5.0


def test_center_of_mass_axes():
    f = np.zeros((5, 7))
    f[1, 4] = 2.0
    assert center_of_mass(f) == (4.0, 1.0)  # (column, row)
    with pytest.raises(ZeroMassError, match="prediction"):
        center_of_mass_displacement(f, np.zeros((5, 7)))


def _blob(H=40, W=40, x=15.0, y=12.0, s=2.0):
    rows, cols = np.mgrid[0:H, 0:W]
    return np.exp(-((cols - x) ** 2 + (rows - y) ** 2) / (2 * s * s))


def test_com_translation_gives_345():
    f = _blob()
    moved = shift_frame(f, 3, 4)
    d = center_of_mass_displacement(f, moved)
    assert abs(d.delta_r - 5.0) < 1e-9
    assert center_of_mass_displacement(f, f).delta_r == 0.0


def test_shift_frame():
    f = np.arange(9.0).reshape(3, 3)
    assert shift_frame(f, 1, 0).tolist() == [[0, 0, 1], [0, 3, 4], [0, 6, 7]]
    assert shift_frame(f, 0, -1).tolist() == [[3, 4, 5], [6, 7, 8], [0, 0, 0]]
    assert not shift_frame(f, 3, 0).any()


def test_displacement_mae_curve_plateau():
    f = np.zeros((64, 64))
    f[30:34, 30:34] = 10.0  # extent 4
    curve = displacement_mae_curve(f, [(d, 0) for d in range(0, 20)])
    vals = [m for _, m in curve]
    assert vals[0] == 0.0
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    plateau = 2 * f.sum() / f.size
    assert all(abs(v - plateau) <= 1e-12 for v in vals[8:])


def test_differential_trend_hand_example():
    frames = np.zeros((4, 2, 2))
    frames[0] += 1.0  # mass 4
    frames[2] += 2.0  # mass 8
    frames[3] += 3.0  # mass 12
    ev = PrecipEvent(0, frames, 2, 2)
    pred = np.stack([np.full((2, 2), 1.5), np.full((2, 2), 4.0)])
    assert differential_trend(ev, pred, 0, 2) == (pytest.approx(1.0), pytest.approx(0.5))
    assert differential_trend(ev, pred, 0, 3) == (pytest.approx(2.0), pytest.approx(3.0))
    with pytest.raises(IndexError):
        differential_trend(ev, pred, 0, 1)
    with pytest.raises(IndexError):
        differential_trend(ev, pred, 5, 3)
