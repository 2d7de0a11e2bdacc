"""Sweep plan schema (JSON, schema_version 1) and validation.

A plan names one workload, its datasets, exactly one sweep axis, a
predictor, and a metric list::

    {
      "schema_version": 1,
      "plan_id": "md-sample-efficiency",
      "workload": "md",                      # md | jet | precip
      "datasets": {"train": "traj.jsonl", "test": "traj.jsonl"},
      "train_slice": {"kind": "time_window", "start_frac": 0.0, "size_frac": 0.9},
      "test_slice": {"kind": "time_window", "start_frac": 0.9, "size_frac": 0.1},
      "axis": {"kind": "subset_sizes", "values": [200, 400, 600, 800, 1000]},
      "transforms": [],
      "predictor": {"toy": "knn_forces", "options": {}},
      "metrics": [{"name": "force_mae", "params": {"group_by_species": true}}],
      "output_dir": "runs/md",
      "seed": 7
    }

Axis kinds: ``subset_sizes`` (values: counts or fractions),
``window_grid`` (sizes, starts, max_end, optional samples), ``rotation``
(step_deg, count), ``bin_ranges`` (feature, lo, hi, n_bins, selected,
total), ``repetitions`` (count). Predictors: ``{"toy": kind}``,
``{"external": [argv...], "timeout": s}`` or ``{"file": path}`` where
the path may contain ``{cell}``. Dataset and output paths are relative
to the plan file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..core import SCHEMA_VERSION, WORKLOADS, canonical_json
from ..sampling import SliceError, slice_spec_from_dict
from ..synth import TOY_KINDS


class PlanValidationError(ValueError):
    pass


AXIS_KINDS = {
    "subset_sizes": {"values"},
    "window_grid": {"sizes", "starts"},
    "rotation": set(),
    "bin_ranges": {"lo", "hi", "n_bins", "selected", "total"},
    "repetitions": {"count"},
}

AXES_BY_WORKLOAD = {
    "md": {"subset_sizes", "window_grid", "repetitions"},
    "jet": {"subset_sizes", "rotation", "bin_ranges", "repetitions"},
    "precip": {"subset_sizes", "repetitions"},
}

METRICS_BY_WORKLOAD = {
    "md": {"force_mae", "energy_mae", "energy_error"},
    "jet": {"accuracy", "auc"},
    "precip": {
        "mae",
        "active_mae",
        "com_displacement",
        "csi",
        "csi_avg",
        "cucsi",
        "gt_mean_intensity",
        "differential_trend",
    },
}

TRANSFORM_KINDS = {"rotate"}


@dataclass
class SweepPlan:
    plan_id: str
    workload: str
    datasets: dict[str, str]
    axis: dict[str, Any]
    predictor: dict[str, Any]
    metrics: list[dict[str, Any]]
    output_dir: str = "out"
    seed: int = 0
    train_slice: dict[str, Any] | None = None
    test_slice: dict[str, Any] | None = None
    transforms: list[dict[str, Any]] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path.cwd)
    source_bytes: bytes | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "plan_id": self.plan_id,
            "workload": self.workload,
            "datasets": self.datasets,
            "axis": self.axis,
            "predictor": self.predictor,
            "metrics": self.metrics,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "transforms": self.transforms,
        }
        if self.train_slice is not None:
            d["train_slice"] = self.train_slice
        if self.test_slice is not None:
            d["test_slice"] = self.test_slice
        return d

    @property
    def plan_hash(self) -> str:
        data = self.source_bytes if self.source_bytes is not None else canonical_json(self.to_dict()).encode()
        return hashlib.sha256(data).hexdigest()

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_path(self) -> Path:
        return self.resolve(self.output_dir)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise PlanValidationError(msg)


def plan_from_dict(doc: Any, base_dir: Path | None = None, source_bytes: bytes | None = None) -> SweepPlan:
    _require(isinstance(doc, dict), "plan must be a JSON object")
    _require(doc.get("schema_version", SCHEMA_VERSION) == SCHEMA_VERSION,
             f"unsupported plan schema_version {doc.get('schema_version')!r}")
    for key in ("plan_id", "workload", "datasets", "axis", "predictor", "metrics"):
        _require(key in doc, f"plan is missing {key!r}")
    known = {"schema_version", "plan_id", "workload", "datasets", "axis", "predictor", "metrics", "output_dir",
             "seed", "train_slice", "test_slice", "transforms"}
    extra = set(doc) - known
    _require(not extra, f"unknown plan fields {sorted(extra)}")
    plan = SweepPlan(
        plan_id=str(doc["plan_id"]),
        workload=doc["workload"],
        datasets=dict(doc["datasets"]),
        axis=dict(doc["axis"]),
        predictor=dict(doc["predictor"]),
        metrics=[dict(m) for m in doc["metrics"]],
        output_dir=doc.get("output_dir", "out"),
        seed=int(doc.get("seed", 0)),
        train_slice=doc.get("train_slice"),
        test_slice=doc.get("test_slice"),
        transforms=[dict(t) for t in doc.get("transforms", [])],
        base_dir=base_dir or Path.cwd(),
        source_bytes=source_bytes,
    )
    validate_plan(plan)
    return plan


def load_plan(path) -> SweepPlan:
    path = Path(path)
    data = path.read_bytes()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise PlanValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return plan_from_dict(doc, path.parent.resolve(), data)


def validate_plan(plan: SweepPlan, check_files: bool = True) -> None:
    w = plan.workload
    _require(w in WORKLOADS, f"unknown workload {w!r}")

    _require("test" in plan.datasets or "train" in plan.datasets, "plan needs a 'test' or 'train' dataset")
    if check_files:
        for role, rel in plan.datasets.items():
            _require(plan.resolve(rel).exists(), f"dataset {role!r} not found: {rel}")

    kind = plan.axis.get("kind")
    _require(kind in AXIS_KINDS, f"axis kind must be one of {sorted(AXIS_KINDS)}, got {kind!r}")
    _require(kind in AXES_BY_WORKLOAD[w], f"axis {kind!r} is not available for workload {w!r}")
    missing = AXIS_KINDS[kind] - set(plan.axis)
    _require(not missing, f"axis {kind!r} is missing {sorted(missing)}")
    if kind in ("subset_sizes",):
        _require(len(plan.axis["values"]) > 0, "subset_sizes needs at least one value")
    if kind == "repetitions":
        _require(int(plan.axis["count"]) >= 1, "repetitions count must be >= 1")

    for key in ("train_slice", "test_slice"):
        spec = getattr(plan, key)
        if spec is not None:
            try:
                slice_spec_from_dict(spec)
            except SliceError as exc:
                raise PlanValidationError(f"{key}: {exc}") from None

    pred = plan.predictor
    routes = [k for k in ("toy", "external", "file") if k in pred]
    _require(len(routes) == 1, "predictor needs exactly one of 'toy', 'external', 'file'")
    if "toy" in pred:
        _require(pred["toy"] in TOY_KINDS, f"unknown toy predictor {pred['toy']!r}")
    if "external" in pred:
        cmd = pred["external"]
        _require(isinstance(cmd, list) and cmd and all(isinstance(c, str) for c in cmd),
                 "external predictor must be a non-empty argv list")

    _require(len(plan.metrics) > 0, "plan needs at least one metric")
    for m in plan.metrics:
        name = m.get("name")
        _require(name in METRICS_BY_WORKLOAD[w], f"unknown metric {name!r} for workload {w!r}")

    for t in plan.transforms:
        _require(t.get("kind") in TRANSFORM_KINDS, f"unknown transform {t.get('kind')!r}")
        _require(w == "jet", "rotate transforms apply to jet workloads only")
