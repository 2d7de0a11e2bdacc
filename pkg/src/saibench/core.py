"""Domain data model and file I/O for the three workload families.

Datasets are keyed by explicit integer sample ids (``time_index`` for
molecular frames, ``event_id`` for jets and precipitation events), never
by position, so slices and per-sample metrics stay joinable across runs.

File formats
------------
* trajectories and jet datasets: UTF-8 JSON lines, one record per line
* precipitation events: a JSON manifest plus one binary file per event,
  ``b"SAIB" | u32 version | u32 T | u32 H | u32 W | T*H*W float32``,
  all little-endian
* predictions: JSON lines, a header record followed by one entry per sample
* metric reports: canonical JSON (sorted keys, shortest round-trip floats)
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1
PRECIP_MAGIC = b"SAIB"
PRECIP_VERSION = 1
_PRECIP_HEADER = struct.Struct("<4sIIII")

WORKLOADS = ("md", "jet", "precip")


class DataFormatError(ValueError):
    """A dataset, prediction, or report file violates its format."""


class ReportInvariantError(ValueError):
    pass


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


def _frozen_array(values: Any, shape_tail: tuple[int, ...] | None = None, what: str = "array") -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if shape_tail is not None and (arr.ndim != 1 + len(shape_tail) or arr.shape[1:] != shape_tail):
        raise DataFormatError(f"{what} has shape {arr.shape}, expected (n, {', '.join(map(str, shape_tail))})")
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{what} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MolecularFrame:
    time_index: int
    species: tuple[int, ...]
    positions: np.ndarray
    energy: float | None = None
    forces: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "time_index", int(self.time_index))
        object.__setattr__(self, "species", tuple(int(z) for z in self.species))
        where = f"frame {self.time_index}"
        pos = _frozen_array(self.positions, (3,), f"{where} positions")
        if pos.shape[0] != len(self.species):
            raise DataFormatError(
                f"{where}: {len(self.species)} species but {pos.shape[0]} position rows"
            )
        object.__setattr__(self, "positions", pos)
        if self.energy is not None:
            e = float(self.energy)
            if not math.isfinite(e):
                raise DataFormatError(f"{where}: energy is not finite")
            object.__setattr__(self, "energy", e)
        if self.forces is not None:
            f = _frozen_array(self.forces, (3,), f"{where} forces")
            if f.shape[0] != len(self.species):
                raise DataFormatError(f"{where}: {len(self.species)} species but {f.shape[0]} force rows")
            object.__setattr__(self, "forces", f)

    @property
    def n_atoms(self) -> int:
        return len(self.species)

    @property
    def labeled(self) -> bool:
        return self.energy is not None and self.forces is not None

    def unlabeled(self) -> "MolecularFrame":
        return MolecularFrame(self.time_index, self.species, self.positions)


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[MolecularFrame, ...]
    molecule_name: str = "molecule"

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise DataFormatError("trajectory has no frames")
        species = frames[0].species
        prev = None
        for fr in frames:
            if fr.species != species:
                raise DataFormatError(f"frame {fr.time_index}: species differ from frame {frames[0].time_index}")
            if prev is not None and fr.time_index <= prev:
                raise DataFormatError(
                    f"frame {fr.time_index}: time_index not strictly increasing (previous {prev})"
                )
            prev = fr.time_index
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "_by_id", {fr.time_index: fr for fr in frames})

    @classmethod
    def from_unsorted(cls, frames: Iterable[MolecularFrame], molecule_name: str = "molecule") -> "Trajectory":
        frames = list(frames)
        seen: set[int] = set()
        for fr in frames:
            if fr.time_index in seen:
                raise DataFormatError(f"duplicate time_index {fr.time_index}")
            seen.add(fr.time_index)
        return cls(tuple(sorted(frames, key=lambda fr: fr.time_index)), molecule_name)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def ids(self) -> list[int]:
        return [fr.time_index for fr in self.frames]

    @property
    def species(self) -> tuple[int, ...]:
        return self.frames[0].species

    def frame(self, time_index: int) -> MolecularFrame:
        return self._by_id[time_index]

    def select(self, ids: Iterable[int]) -> list[MolecularFrame]:
        return [self._by_id[i] for i in sorted(ids)]


@dataclass(frozen=True)
class JetEvent:
    event_id: int
    particles: np.ndarray
    label: int
    jet_energy: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "event_id", int(self.event_id))
        parts = _frozen_array(self.particles, (4,), f"event {self.event_id} particles") if len(
            self.particles
        ) else None
        if parts is None or parts.shape[0] == 0:
            raise DataFormatError(f"event {self.event_id}: no particles")
        object.__setattr__(self, "particles", parts)
        label = int(self.label)
        if label not in (0, 1):
            raise DataFormatError(f"event {self.event_id}: label {label} not in {{0, 1}}")
        object.__setattr__(self, "label", label)
        total = math.fsum(parts[:, 0])
        given = float(self.jet_energy)
        if math.isnan(given):
            given = total
        elif abs(given - total) > 1e-6 * max(abs(total), 1e-300):
            raise DataFormatError(f"event {self.event_id}: jet_energy {given} != constituent sum {total}")
        object.__setattr__(self, "jet_energy", given)

    @property
    def n_particles(self) -> int:
        return self.particles.shape[0]

    def with_particles(self, particles: np.ndarray) -> "JetEvent":
        return JetEvent(self.event_id, particles, self.label)


@dataclass(frozen=True)
class JetDataset:
    events: tuple[JetEvent, ...]
    name: str = "jets"

    def __post_init__(self):
        events = tuple(sorted(self.events, key=lambda ev: ev.event_id))
        seen: set[int] = set()
        for ev in events:
            if ev.event_id in seen:
                raise DataFormatError(f"duplicate event_id {ev.event_id}")
            seen.add(ev.event_id)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "_by_id", {ev.event_id: ev for ev in events})

    def __len__(self) -> int:
        return len(self.events)

    @property
    def ids(self) -> list[int]:
        return [ev.event_id for ev in self.events]

    def event(self, event_id: int) -> JetEvent:
        return self._by_id[event_id]

    def select(self, ids: Iterable[int]) -> list[JetEvent]:
        return [self._by_id[i] for i in sorted(ids)]


@dataclass(frozen=True, eq=False)
class PrecipEvent:
    """Fixed-interval intensity frames (mm/h), the first ``input_len`` are model input."""

    event_id: int
    frames: np.ndarray
    input_len: int = 9
    output_len: int = 20
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "event_id", int(self.event_id))
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[1] < 1 or frames.shape[2] < 1:
            raise DataFormatError(f"event {self.event_id}: frames must be T x H x W, got {frames.shape}")
        if frames.shape[0] != self.input_len + self.output_len:
            raise DataFormatError(
                f"event {self.event_id}: T={frames.shape[0]} but p+f={self.input_len + self.output_len}"
            )
        if not np.all(np.isfinite(frames)):
            raise DataFormatError(f"event {self.event_id}: non-finite intensity")
        if np.any(frames < 0):
            raise DataFormatError(f"event {self.event_id}: negative intensity")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __eq__(self, other):
        if not isinstance(other, PrecipEvent):
            return NotImplemented
        return (
            self.event_id == other.event_id
            and self.input_len == other.input_len
            and self.output_len == other.output_len
            and np.array_equal(self.frames, other.frames)
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.frames.shape

    @property
    def inputs(self) -> np.ndarray:
        return self.frames[: self.input_len]

    @property
    def targets(self) -> np.ndarray:
        return self.frames[self.input_len :]


@dataclass(frozen=True)
class MdPrediction:
    energy: float
    forces: np.ndarray


@dataclass
class PredictionSet:
    """Model outputs keyed by sample id.

    Entry types per workload: ``md`` -> MdPrediction, ``jet`` -> array of
    two class scores, ``precip`` -> f x H x W array of output frames.
    """

    model_id: str
    run_id: str
    seed: int
    workload: str
    entries: dict[int, Any]

    def __post_init__(self):
        if self.workload not in WORKLOADS:
            raise DataFormatError(f"unknown workload {self.workload!r}")

    def __getitem__(self, sample_id: int):
        return self.entries[sample_id]

    def __contains__(self, sample_id: int) -> bool:
        return sample_id in self.entries

    def validate_against(self, samples: Sequence[Any]) -> None:
        """Check every entry's shape against the sample it refers to."""
        for sample in samples:
            sid = sample_id_of(sample)
            if sid not in self.entries:
                raise DataFormatError(f"no prediction for sample {sid}")
            out = self.entries[sid]
            if self.workload == "md":
                if out.forces.shape != (sample.n_atoms, 3):
                    raise DataFormatError(f"sample {sid}: forces shape {out.forces.shape}")
            elif self.workload == "jet":
                scores = np.asarray(out)
                if scores.shape != (2,) or np.any(scores < 0) or np.any(scores > 1):
                    raise DataFormatError(f"sample {sid}: class scores {scores!r} invalid")
                if abs(scores.sum() - 1.0) > 1e-9:
                    raise DataFormatError(f"sample {sid}: class scores do not sum to 1")
            else:
                want = (sample.output_len,) + sample.shape[1:]
                if np.shape(out) != want:
                    raise DataFormatError(f"sample {sid}: output frames {np.shape(out)}, expected {want}")


def sample_id_of(sample: Any) -> int:
    if isinstance(sample, MolecularFrame):
        return sample.time_index
    return sample.event_id


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------


def plain(obj: Any) -> Any:
    """Convert numpy values, tuples and non-string keys into JSON-ready data."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value} cannot be serialized")
        return value
    return obj


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace, shortest round-trip floats."""
    return json.dumps(plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False, ensure_ascii=False)


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> bool:
    """Write via temp file and rename. Returns False when the file already holds ``data``."""
    path = Path(path)
    if path.exists() and path.read_bytes() == data:
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return True


def _write_jsonl(path, records: Iterable[Any]) -> None:
    text = "".join(canonical_json(r) + "\n" for r in records)
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_jsonl(path) -> list[tuple[int, dict]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataFormatError(f"{path}:{lineno}: record is not an object")
            out.append((lineno, rec))
    return out


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def frame_record(frame: MolecularFrame, molecule_name: str | None = None) -> dict:
    rec: dict[str, Any] = {
        "time_index": frame.time_index,
        "species": list(frame.species),
        "positions": frame.positions,
    }
    if frame.energy is not None:
        rec["energy"] = frame.energy
    if frame.forces is not None:
        rec["forces"] = frame.forces
    if molecule_name is not None:
        rec["molecule"] = molecule_name
    return rec


def frame_from_record(rec: dict) -> MolecularFrame:
    try:
        return MolecularFrame(
            time_index=rec["time_index"],
            species=rec["species"],
            positions=rec["positions"],
            energy=rec.get("energy"),
            forces=rec.get("forces"),
        )
    except KeyError as exc:
        raise DataFormatError(f"missing field {exc.args[0]!r}") from None


def write_trajectory(traj: Trajectory, path) -> None:
    _write_jsonl(path, (frame_record(fr, traj.molecule_name) for fr in traj.frames))


def load_trajectory(path, format: str = "jsonl") -> Trajectory:
    if format != "jsonl":
        raise ValueError(f"unsupported trajectory format {format!r}")
    frames = []
    name = None
    for lineno, rec in _read_jsonl(path):
        try:
            frames.append(frame_from_record(rec))
        except (DataFormatError, ValueError, TypeError) as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
        if name is None:
            name = rec.get("molecule")
    if not frames:
        raise DataFormatError(f"{path}: no frames")
    return Trajectory.from_unsorted(frames, name or Path(path).stem)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


def event_record(ev: JetEvent) -> dict:
    return {"event_id": ev.event_id, "label": ev.label, "particles": ev.particles}


def event_from_record(rec: dict) -> JetEvent:
    try:
        parts = rec["particles"]
        return JetEvent(rec["event_id"], np.asarray(parts, dtype=np.float64).reshape(-1, 4) if parts else [], rec["label"])
    except KeyError as exc:
        raise DataFormatError(f"missing field {exc.args[0]!r}") from None


def write_jet_dataset(ds: JetDataset, path) -> None:
    _write_jsonl(path, (event_record(ev) for ev in ds.events))


def load_jet_dataset(path, format: str = "jsonl") -> JetDataset:
    if format != "jsonl":
        raise ValueError(f"unsupported jet format {format!r}")
    events = []
    for lineno, rec in _read_jsonl(path):
        try:
            events.append(event_from_record(rec))
        except (DataFormatError, ValueError, TypeError) as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return JetDataset(tuple(events), Path(path).stem)


# ---------------------------------------------------------------------------
# precipitation
# ---------------------------------------------------------------------------


def encode_frames(frames: np.ndarray) -> bytes:
    T, H, W = frames.shape
    header = _PRECIP_HEADER.pack(PRECIP_MAGIC, PRECIP_VERSION, T, H, W)
    return header + np.ascontiguousarray(frames, dtype="<f4").tobytes()


def decode_frames(data: bytes, where: str = "frames") -> np.ndarray:
    if len(data) < _PRECIP_HEADER.size:
        raise DataFormatError(f"{where}: truncated header")
    magic, version, T, H, W = _PRECIP_HEADER.unpack_from(data)
    if magic != PRECIP_MAGIC:
        raise DataFormatError(f"{where}: bad magic {magic!r}")
    if version != PRECIP_VERSION:
        raise DataFormatError(f"{where}: unsupported version {version}")
    expected = _PRECIP_HEADER.size + 4 * T * H * W
    if len(data) != expected:
        raise DataFormatError(f"{where}: size {len(data)} bytes, expected {expected} for {T}x{H}x{W}")
    return np.frombuffer(data, dtype="<f4", offset=_PRECIP_HEADER.size).reshape(T, H, W).astype(np.float64)


def write_precip_dataset(events: Sequence[PrecipEvent], manifest_path) -> None:
    manifest_path = Path(manifest_path)
    entries = []
    for ev in sorted(events, key=lambda e: e.event_id):
        fname = f"event_{ev.event_id:06d}.saib"
        atomic_write_bytes(manifest_path.parent / fname, encode_frames(ev.frames))
        entries.append(
            {"event_id": ev.event_id, "p": ev.input_len, "f": ev.output_len, "file": fname, "dims": list(ev.shape)}
        )
    doc = {"schema_version": SCHEMA_VERSION, "events": entries}
    atomic_write_bytes(manifest_path, (canonical_json(doc) + "\n").encode("utf-8"))


def load_precip_dataset(manifest_path) -> list[PrecipEvent]:
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: malformed manifest ({exc.msg})") from None
    events = []
    seen: set[int] = set()
    for entry in doc.get("events", []):
        eid = int(entry["event_id"])
        if eid in seen:
            raise DataFormatError(f"{manifest_path}: duplicate event_id {eid}")
        seen.add(eid)
        where = f"event {eid} ({entry['file']})"
        frames = decode_frames((manifest_path.parent / entry["file"]).read_bytes(), where)
        if list(frames.shape) != [int(d) for d in entry["dims"]]:
            raise DataFormatError(f"{where}: dims {entry['dims']} disagree with file header {list(frames.shape)}")
        try:
            events.append(PrecipEvent(eid, frames, int(entry["p"]), int(entry["f"])))
        except DataFormatError as exc:
            raise DataFormatError(f"{where}: {exc}") from None
    return sorted(events, key=lambda e: e.event_id)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def prediction_to_wire(workload: str, out: Any) -> dict:
    if workload == "md":
        return {"energy": out.energy, "forces": out.forces}
    if workload == "jet":
        return {"scores": np.asarray(out)}
    return {"frames": np.asarray(out)}


def prediction_from_wire(workload: str, obj: dict) -> Any:
    if workload == "md":
        return MdPrediction(float(obj["energy"]), np.asarray(obj["forces"], dtype=np.float64).reshape(-1, 3))
    if workload == "jet":
        return np.asarray(obj["scores"], dtype=np.float64)
    return np.asarray(obj["frames"], dtype=np.float64)


def write_predictions(preds: PredictionSet, path) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "model_id": preds.model_id,
        "run_id": preds.run_id,
        "seed": preds.seed,
        "workload": preds.workload,
    }
    body = ({"id": sid, "output": prediction_to_wire(preds.workload, preds.entries[sid])} for sid in sorted(preds.entries))
    _write_jsonl(path, [header, *body])


def load_predictions(path) -> PredictionSet:
    records = _read_jsonl(path)
    if not records:
        raise DataFormatError(f"{path}: empty prediction file")
    _, header = records[0]
    workload = header.get("workload")
    entries: dict[int, Any] = {}
    for lineno, rec in records[1:]:
        sid = int(rec["id"])
        if sid in entries:
            raise DataFormatError(f"{path}:{lineno}: duplicate id {sid}")
        entries[sid] = prediction_from_wire(workload, rec["output"])
    return PredictionSet(header["model_id"], header["run_id"], int(header["seed"]), workload, entries)


# ---------------------------------------------------------------------------
# metric reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("histogram needs len(edges) == len(counts) + 1")

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "Histogram":
        return cls(tuple(float(e) for e in d["edges"]), tuple(int(c) for c in d["counts"]))


def _flatten(values: Iterable[Any]) -> list[float]:
    flat: list[float] = []
    for v in values:
        if v is None:
            continue
        if isinstance(v, (list, tuple, np.ndarray)):
            flat.extend(float(x) for x in np.ravel(v) if x is not None)
        else:
            flat.append(float(v))
    return flat


def compute_aggregates(per_sample: Mapping[int, Any]) -> dict[str, float]:
    """count/mean/median/min/max over all defined values, reduced in id order."""
    values = _flatten(per_sample[k] for k in sorted(per_sample))
    if not values:
        return {"count": 0}
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    median = ordered[mid] if n % 2 else (ordered[mid - 1] + ordered[mid]) / 2
    return {
        "count": n,
        "mean": math.fsum(values) / n,
        "median": median,
        "min": ordered[0],
        "max": ordered[-1],
    }


@dataclass
class MetricReport:
    metric_name: str
    per_sample: dict[int, Any]
    params: dict[str, Any] = field(default_factory=dict)
    scope: dict[str, Any] | None = None
    aggregates: dict[str, float] | None = None
    histograms: list[Histogram] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.per_sample = {int(k): v for k, v in self.per_sample.items()}
        if self.aggregates is None:
            self.aggregates = compute_aggregates(self.per_sample)

    @property
    def ids(self) -> list[int]:
        return sorted(self.per_sample)

    def value(self, key: str) -> float:
        return self.aggregates[key]

    def check(self, tol: float = 1e-12) -> None:
        """Raise unless the stored aggregates agree with the per-sample values."""
        fresh = compute_aggregates(self.per_sample)
        agg = self.aggregates or {}
        if agg.get("count", 0) and not self.per_sample:
            raise ReportInvariantError(f"{self.metric_name}: aggregates present but per_sample empty")
        if set(agg) != set(fresh):
            raise ReportInvariantError(f"{self.metric_name}: aggregate keys {sorted(agg)} != {sorted(fresh)}")
        for key, want in fresh.items():
            got = agg[key]
            if abs(got - want) > tol * max(1.0, abs(want)):
                raise ReportInvariantError(f"{self.metric_name}: aggregate {key}={got} but per-sample values give {want}")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "metric_name": self.metric_name,
            "params": self.params,
            "scope": self.scope,
            "per_sample": [[sid, self.per_sample[sid]] for sid in self.ids],
            "aggregates": self.aggregates,
            "histograms": [h.to_dict() for h in self.histograms],
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise DataFormatError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(
            metric_name=d["metric_name"],
            per_sample={int(sid): v for sid, v in d["per_sample"]},
            params=d.get("params") or {},
            scope=d.get("scope"),
            aggregates=d.get("aggregates"),
            histograms=[Histogram.from_dict(h) for h in d.get("histograms") or []],
            extra=d.get("extra") or {},
        )


def report_bytes(report: MetricReport) -> bytes:
    report.check()
    return (canonical_json(report.to_dict()) + "\n").encode("utf-8")


def write_report(report: MetricReport, path) -> bool:
    """Write canonical JSON; returns False when identical bytes were already there."""
    return atomic_write_bytes(path, report_bytes(report))


def read_report(path) -> MetricReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: malformed report ({exc.msg})") from None
    report = MetricReport.from_dict(doc)
    report.check()
    return report
