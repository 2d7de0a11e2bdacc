from __future__ import annotations

import math

import numpy as np
import pytest

from saibench.core import PredictionSet
from saibench.metrics import center_of_mass, differential_trend, force_mae, roc_auc
from saibench.sampling import time_window_slice
from saibench.synth import (
    AdvectionExtrapolator,
    Blob,
    KnnForces,
    LinearTagger,
    MdToyParams,
    OutOfBoundsError,
    PrecipToyParams,
    basin_schedule,
    gen_jet_toy,
    gen_md_toy,
    gen_precip_toy,
    harmonic_energy_forces,
    jet_moments,
    make_toy_model,
    toy_predict,
)
from saibench.transforms import rotate_dataset


def test_md_forces_are_negative_gradient():
    x0 = np.array([[0.0, 0, 0], [1.4, 0, 0], [1.4, 1.4, 0], [0, 1.4, 0.5]])
    k = 2.0
    traj = gen_md_toy(MdToyParams(n_atoms=4, n_frames=60, k=k, equilibrium=x0, seed=9))

    def energy(x):  # independent statement of the harmonic well
        return 0.5 * k * sum(float(v) ** 2 for v in np.ravel(x - x0))

    h = 1e-5
    for fr in traj.frames[::7]:
        assert fr.energy == pytest.approx(energy(fr.positions), abs=1e-12)
        num = np.zeros((4, 3))
        for i in range(4):
            for d in range(3):
                p, m = fr.positions.copy(), fr.positions.copy()
                p[i, d] += h
                m[i, d] -= h
                num[i, d] = -(energy(p) - energy(m)) / (2 * h)
        assert np.max(np.abs(num - fr.forces)) < 1e-5


def test_harmonic_energy_forces_reference():
    x0 = np.zeros((2, 3))
    x = np.array([[1.0, 0, 0], [0, 2.0, 0]])
    e, f = harmonic_energy_forces(x, x0, 2.0)
    assert e == pytest.approx(0.5 * 2.0 * (1 + 4))
    assert f.tolist() == [[-2.0, 0, 0], [0, -4.0, 0]]


def test_md_deterministic():
    a = gen_md_toy(MdToyParams(n_frames=20, seed=1))
    b = gen_md_toy(MdToyParams(n_frames=20, seed=1))
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a.frames, b.frames))
    c = gen_md_toy(MdToyParams(n_frames=20, seed=2))
    assert not np.array_equal(a.frames[0].positions, c.frames[0].positions)


def test_basin_schedule_square_wave():
    s = basin_schedule(8, 4)
    assert len(s) == 8 and set(np.unique(s)) <= {0.0, 1.0}
    assert s[0] != s[2]


def test_precip_com_path_and_mass():
    ev = gen_precip_toy(PrecipToyParams(velocity=(0.5, -0.3), decay=0.05, seed=4, n_blobs=2, event_id=3))
    for t, (x, y) in enumerate(ev.meta["com_path"]):
        xc, yc = center_of_mass(ev.frames[t])
        assert abs(xc - x) < 1e-6 and abs(yc - y) < 1e-6
        assert ev.frames[t].sum() == pytest.approx(ev.meta["mass"][t], rel=1e-9)
    H, W = ev.shape[1:]
    mass = ev.meta["mass"]
    for j in (ev.input_len, ev.shape[0] - 1):
        gt, _ = differential_trend(ev, ev.targets, 0, j)
        assert abs(gt - (mass[j] - mass[0]) / (H * W)) < 1e-9


def test_precip_out_of_bounds():
    with pytest.raises(OutOfBoundsError):
        gen_precip_toy(PrecipToyParams(blobs=(Blob(5.0, 5.0, 2.0, 10.0),)))
    with pytest.raises(ValueError):
        PrecipToyParams(decay=1.0)


def test_jets_balanced_and_in_range():
    ds = gen_jet_toy(101, seed=2)
    labels = [ev.label for ev in ds.events]
    assert labels.count(1) == 50 and labels.count(0) == 51
    assert all(550 <= ev.jet_energy <= 2440 for ev in ds.events)


def test_knn_learning_improves_with_data():
    traj = gen_md_toy(MdToyParams(n_frames=600, seed=0))
    train = time_window_slice(traj, 0.0, 0.8).sample_ids
    test = traj.select(time_window_slice(traj, 0.8, 0.2).sample_ids)
    small = toy_predict("knn_forces", traj.select(train[:40]), test)
    large = toy_predict("knn_forces", traj.select(train), test)
    assert force_mae(test, large).extra["overall"] < force_mae(test, small).extra["overall"]


def test_knn_rejects_empty_training():
    with pytest.raises(ValueError):
        KnnForces([])


def test_tagger_separates_and_is_rotation_invariant(jet_ds):
    test = gen_jet_toy(200, seed=99)
    model = LinearTagger(list(jet_ds.events))
    scores = [model.score(ev) for ev in test.events]
    auc = roc_auc(scores, [ev.label for ev in test.events]).auc
    assert auc > 0.9
    rot = rotate_dataset(test, 1.234)
    assert np.allclose(scores, [model.score(ev) for ev in rot.events], atol=1e-12)
    assert np.allclose(jet_moments(test.events[0]), jet_moments(rot.events[0]), atol=1e-9)
    raw = jet_moments(test.events[0], "raw")
    assert not np.allclose(raw, jet_moments(rot.events[0], "raw"))


def test_tagger_outputs_valid_scores(jet_ds):
    preds = toy_predict("linear_tagger", list(jet_ds.events), list(jet_ds.events)[:10], seed=1)
    preds.validate_against(list(jet_ds.events)[:10])


def test_advection_extrapolator_tracks_motion():
    ev = gen_precip_toy(PrecipToyParams(velocity=(0.5, 0.25), seed=1))
    out = AdvectionExtrapolator().predict(ev)
    assert out.shape == ev.targets.shape
    x_pred, y_pred = center_of_mass(out[-1])
    x_true, y_true = ev.meta["com_path"][-1]
    assert math.hypot(x_pred - x_true, y_pred - y_true) < 0.2
    noisy = AdvectionExtrapolator(noise=0.1).predict(ev, seed=3)
    assert np.array_equal(noisy, AdvectionExtrapolator(noise=0.1).predict(ev, seed=3))
    assert not np.array_equal(noisy, out)


def test_toy_predict_order_independent(precip_events):
    a = toy_predict("advection_extrapolator", None, precip_events, seed=7)
    b = toy_predict("advection_extrapolator", None, list(reversed(precip_events)), seed=7)
    assert isinstance(a, PredictionSet) and a.model_id == "toy:advection_extrapolator"
    assert all(np.array_equal(a[i], b[i]) for i in a.entries)


def test_make_toy_model_options():
    with pytest.raises(ValueError):
        make_toy_model("nope", [])
    m = make_toy_model("knn_forces", gen_md_toy(MdToyParams(n_frames=10)).frames,
                       descriptor={"n_bins": 8, "species": [1, 6]})
    assert m.cache.params.n_bins == 8
