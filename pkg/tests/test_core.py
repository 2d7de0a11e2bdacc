from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saibench.core import (
    DataFormatError,
    Histogram,
    JetDataset,
    JetEvent,
    MdPrediction,
    MetricReport,
    MolecularFrame,
    PrecipEvent,
    PredictionSet,
    ReportInvariantError,
    Trajectory,
    atomic_write_bytes,
    canonical_json,
    compute_aggregates,
    decode_frames,
    encode_frames,
    load_jet_dataset,
    load_precip_dataset,
    load_predictions,
    load_trajectory,
    read_report,
    report_bytes,
    write_jet_dataset,
    write_precip_dataset,
    write_predictions,
    write_report,
    write_trajectory,
)

from conftest import make_frame, make_jet


# ---------------------------------------------------------------- domain types


def test_frame_shape_mismatch():
    with pytest.raises(DataFormatError, match="2 species but 3"):
        MolecularFrame(0, [1, 1], np.zeros((3, 3)))


def test_frame_nonfinite():
    with pytest.raises(DataFormatError):
        MolecularFrame(0, [1], [[0.0, np.nan, 0.0]])
    with pytest.raises(DataFormatError):
        MolecularFrame(0, [1], [[0.0, 0.0, 0.0]], energy=float("inf"))


def test_frame_unlabeled_drops_labels():
    fr = make_frame(0)
    assert fr.labeled and not fr.unlabeled().labeled
    assert np.array_equal(fr.unlabeled().positions, fr.positions)


def test_frame_arrays_read_only():
    fr = make_frame(0)
    with pytest.raises(ValueError):
        fr.positions[0, 0] = 1.0


def test_trajectory_requires_increasing_time():
    a, b = make_frame(1), make_frame(0)
    with pytest.raises(DataFormatError, match="strictly increasing"):
        Trajectory((a, b))
    traj = Trajectory.from_unsorted([a, b])
    assert traj.ids == [0, 1]


def test_trajectory_duplicate_time():
    with pytest.raises(DataFormatError, match="duplicate"):
        Trajectory.from_unsorted([make_frame(1), make_frame(1)])


def test_trajectory_species_must_match():
    with pytest.raises(DataFormatError, match="species"):
        Trajectory((make_frame(0, n=3), make_frame(1, n=4)))


def test_jet_energy_computed_and_checked():
    ev = make_jet(0)
    assert ev.jet_energy == pytest.approx(ev.particles[:, 0].sum())
    with pytest.raises(DataFormatError):
        JetEvent(1, ev.particles, 0, jet_energy=ev.jet_energy * 1.1)


def test_jet_bad_label_and_empty():
    with pytest.raises(DataFormatError):
        make_jet(0, label=2)
    with pytest.raises(DataFormatError):
        JetEvent(0, np.zeros((0, 4)), 0)


def test_jet_dataset_sorted_and_unique():
    ds = JetDataset((make_jet(2), make_jet(1)))
    assert ds.ids == [1, 2]
    with pytest.raises(DataFormatError):
        JetDataset((make_jet(1), make_jet(1)))


def test_precip_event_validation():
    with pytest.raises(DataFormatError, match="negative"):
        PrecipEvent(0, -np.ones((3, 2, 2)), 1, 2)
    with pytest.raises(DataFormatError, match="p\\+f"):
        PrecipEvent(0, np.ones((3, 2, 2)), 2, 2)
    ev = PrecipEvent(0, np.arange(12.0).reshape(3, 2, 2), 1, 2)
    assert ev.inputs.shape == (1, 2, 2) and ev.targets.shape == (2, 2, 2)


# ---------------------------------------------------------------- canonical json


def test_canonical_json_sorted_compact():
    assert canonical_json({"b": 1, "a": np.float64(0.1), "c": (1, 2)}) == '{"a":0.1,"b":1,"c":[1,2]}'


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_canonical_json_float_roundtrip(x):
    assert json.loads(canonical_json([x]))[0] == x


def test_atomic_write_skips_identical(tmp_path):
    p = tmp_path / "sub" / "f.bin"
    assert atomic_write_bytes(p, b"abc") is True
    assert atomic_write_bytes(p, b"abc") is False
    assert atomic_write_bytes(p, b"abd") is True
    assert p.read_bytes() == b"abd"
    assert [f.name for f in p.parent.iterdir()] == ["f.bin"]


# ---------------------------------------------------------------- file formats


def test_trajectory_roundtrip(tmp_path, md_traj):
    path = tmp_path / "t.jsonl"
    write_trajectory(md_traj, path)
    back = load_trajectory(path)
    assert back.ids == md_traj.ids and back.molecule_name == md_traj.molecule_name
    for a, b in zip(back.frames, md_traj.frames):
        assert np.array_equal(a.positions, b.positions) and a.energy == b.energy
        assert np.array_equal(a.forces, b.forces)
    first = path.read_bytes()
    write_trajectory(back, path)
    assert path.read_bytes() == first


def test_trajectory_error_names_line(tmp_path):
    path = tmp_path / "t.jsonl"
    good = canonical_json({"time_index": 0, "species": [1], "positions": [[0, 0, 0]]})
    path.write_text(good + "\n" + '{"time_index": 1, "species": [1]}\n')
    with pytest.raises(DataFormatError, match=":2:"):
        load_trajectory(path)
    path.write_text(good + "\n{oops\n")
    with pytest.raises(DataFormatError, match=":2:"):
        load_trajectory(path)


def test_jet_roundtrip(tmp_path, jet_ds):
    path = tmp_path / "j.jsonl"
    write_jet_dataset(jet_ds, path)
    back = load_jet_dataset(path)
    assert back.ids == jet_ds.ids
    for a, b in zip(back.events, jet_ds.events):
        assert np.array_equal(a.particles, b.particles) and a.label == b.label


def test_precip_roundtrip_is_float32_exact(tmp_path, precip_events):
    man = tmp_path / "p" / "manifest.json"
    write_precip_dataset(precip_events, man)
    back = load_precip_dataset(man)
    assert [e.event_id for e in back] == [e.event_id for e in precip_events]
    for a, b in zip(back, precip_events):
        assert np.array_equal(a.frames, b.frames.astype(np.float32).astype(np.float64))
    # a second write of the loaded data reproduces identical bytes
    snapshot = {f.name: f.read_bytes() for f in man.parent.iterdir()}
    write_precip_dataset(back, man)
    assert snapshot == {f.name: f.read_bytes() for f in man.parent.iterdir()}


def test_precip_decode_errors():
    data = encode_frames(np.ones((2, 3, 4)))
    assert decode_frames(data).shape == (2, 3, 4)
    with pytest.raises(DataFormatError, match="size"):
        decode_frames(data[:-4])
    with pytest.raises(DataFormatError):
        decode_frames(b"XXXX" + data[4:])


def test_precip_dims_mismatch(tmp_path, precip_events):
    man = tmp_path / "manifest.json"
    write_precip_dataset(precip_events[:1], man)
    doc = json.loads(man.read_text())
    doc["events"][0]["dims"] = [1, 1, 1]
    man.write_text(json.dumps(doc))
    with pytest.raises(DataFormatError, match="dims"):
        load_precip_dataset(man)


def test_predictions_roundtrip(tmp_path):
    frames = [make_frame(t) for t in range(3)]
    preds = PredictionSet("m", "r", 4, "md", {fr.time_index: MdPrediction(1.5, fr.forces * 2) for fr in frames})
    path = tmp_path / "p.jsonl"
    write_predictions(preds, path)
    back = load_predictions(path)
    back.validate_against(frames)
    assert back.model_id == "m" and back.seed == 4
    assert np.array_equal(back[1].forces, preds[1].forces)


def test_prediction_validation():
    ev = make_jet(0)
    with pytest.raises(DataFormatError, match="sum to 1"):
        PredictionSet("m", "r", 0, "jet", {0: np.array([0.5, 0.6])}).validate_against([ev])
    with pytest.raises(DataFormatError, match="no prediction"):
        PredictionSet("m", "r", 0, "jet", {}).validate_against([ev])
    with pytest.raises(DataFormatError):
        PredictionSet("m", "r", 0, "nope", {})


# ---------------------------------------------------------------- reports


def test_aggregates_flatten_and_skip_none():
    agg = compute_aggregates({2: [1.0, 3.0], 1: None, 0: 5.0})
    assert agg == {"count": 3, "mean": 3.0, "median": 3.0, "min": 1.0, "max": 5.0}


def test_report_roundtrip_and_check(tmp_path):
    rep = MetricReport("m", {3: 1.0, 1: 2.0}, params={"T": 16}, histograms=[Histogram((0.0, 1.0), (2,))])
    path = tmp_path / "r.json"
    assert write_report(rep, path)
    assert not write_report(rep, path)
    back = read_report(path)
    assert back.per_sample == rep.per_sample and back.ids == [1, 3]
    assert report_bytes(back) == path.read_bytes()


def test_report_detects_tampered_aggregates(tmp_path):
    rep = MetricReport("m", {1: 1.0, 2: 2.0})
    rep.aggregates["mean"] = 9.0
    with pytest.raises(ReportInvariantError):
        rep.check()
    path = tmp_path / "r.json"
    d = MetricReport("m", {1: 1.0}).to_dict()
    d["aggregates"]["max"] = 2.0
    path.write_text(json.dumps(d))
    with pytest.raises(ReportInvariantError):
        read_report(path)


def test_report_schema_version(tmp_path):
    d = MetricReport("m", {1: 1.0}).to_dict()
    d["schema_version"] = 99
    path = tmp_path / "r.json"
    path.write_text(json.dumps(d))
    with pytest.raises(DataFormatError):
        read_report(path)


@settings(max_examples=50)
@given(st.dictionaries(st.integers(0, 10**6), st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_report_aggregates_consistent(values):
    rep = MetricReport("m", values)
    rep.check()
    assert rep.aggregates["min"] <= rep.aggregates["median"] <= rep.aggregates["max"]
