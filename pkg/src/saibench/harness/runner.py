"""Sweep execution: plan -> cells -> slices -> predictions -> metric reports.

Output layout under the plan's output directory::

    manifest.json                 plan hash and one entry per cell
    cells/0000/cell.json          coordinates, seed, status, wall time
    cells/0000/<metric>.json      canonical metric reports

A cell whose ``cell.json`` records success for the same plan hash, and
whose reports read back cleanly, is skipped on rerun.
"""

from __future__ import annotations

import json
import logging
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..core import (
    SCHEMA_VERSION,
    DataFormatError,
    JetDataset,
    MetricReport,
    PrecipEvent,
    PredictionSet,
    Trajectory,
    atomic_write_bytes,
    canonical_json,
    load_jet_dataset,
    load_precip_dataset,
    load_predictions,
    load_trajectory,
    read_report,
    write_report,
)
from ..metrics import (
    ZeroMassError,
    active_area_mae,
    auc_report,
    center_of_mass_displacement,
    classification_metrics,
    csi,
    csi_avg,
    cucsi,
    differential_trend,
    energy_error_series,
    energy_mae,
    force_mae,
    mae,
    mean_intensity,
)
from ..rng import derive_seed
from ..sampling import (
    SliceError,
    TimeWindow,
    bin_by_scalar,
    equalized_bin_sample,
    random_subsample,
    slice_spec_from_dict,
    time_window_slice,
    window_grid,
)
from ..synth import toy_predict
from ..transforms import rotate_dataset
from .plan import PlanValidationError, SweepPlan, validate_plan
from .protocol import DEFAULT_TIMEOUT, run_external_predictor

log = logging.getLogger(__name__)


class CellFailure(RuntimeError):
    pass


@dataclass
class Cell:
    index: int
    coords: dict[str, Any]
    seed: int
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    predictor_seed: int | None = None
    rotation_deg: float = 0.0
    train_scope: dict | None = None
    test_scope: dict | None = None


@dataclass
class CellRecord:
    index: int
    coords: dict[str, Any]
    status: str
    reports: list[str] = field(default_factory=list)
    error: str | None = None
    skipped: bool = False

    def to_dict(self) -> dict:
        d = {"index": self.index, "coords": self.coords, "status": self.status, "reports": self.reports}
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class SweepResult:
    plan_id: str
    plan_hash: str
    cells: list[CellRecord]
    manifest_path: Path

    @property
    def failed(self) -> list[CellRecord]:
        return [c for c in self.cells if c.status != "ok"]

    def reports(self, metric: str) -> list[MetricReport]:
        root = self.manifest_path.parent
        return [read_report(root / r) for c in self.cells for r in c.reports if Path(r).stem == metric]


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def load_dataset(workload: str, path: Path):
    if workload == "md":
        return load_trajectory(path)
    if workload == "jet":
        return load_jet_dataset(path)
    return load_precip_dataset(path)


def samples_by_id(dataset) -> dict[int, Any]:
    if isinstance(dataset, Trajectory):
        return {fr.time_index: fr for fr in dataset.frames}
    if isinstance(dataset, JetDataset):
        return {ev.event_id: ev for ev in dataset.events}
    return {ev.event_id: ev for ev in dataset}


def _apply_slice(dataset, spec: dict | None, seed: int, default: dict | None = None) -> tuple[tuple[int, ...], dict | None]:
    spec = spec if spec is not None else default
    ids = sorted(samples_by_id(dataset))
    if spec is None:
        return tuple(ids), None
    parsed = slice_spec_from_dict(spec)
    if isinstance(parsed, TimeWindow):
        if not isinstance(dataset, Trajectory):
            raise PlanValidationError("time_window slices apply to trajectories only")
        return time_window_slice(dataset, parsed.start_frac, parsed.size_frac).sample_ids, parsed.to_dict()
    if parsed.kind == "random_subset":
        amount = parsed.count if parsed.count is not None else parsed.fraction
        return random_subsample(ids, amount, parsed.seed).sample_ids, parsed.to_dict()
    raise PlanValidationError(f"slice kind {parsed.kind!r} cannot be used as a dataset slice")


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


def build_cells(plan: SweepPlan, train_data, test_data) -> list[Cell]:
    """Expand the sweep axis into cells with concrete train/test ids."""
    w = plan.workload
    md_train_default = {"kind": "time_window", "start_frac": 0.0, "size_frac": 0.9} if w == "md" else None
    md_test_default = {"kind": "time_window", "start_frac": 0.9, "size_frac": 0.1} if w == "md" else None
    axis = plan.axis
    kind = axis["kind"]
    try:
        pool, train_scope = (
            _apply_slice(train_data, plan.train_slice, plan.seed, md_train_default) if train_data is not None else ((), None)
        )
        test_ids, test_scope = _apply_slice(test_data, plan.test_slice, plan.seed, md_test_default)
        cells: list[Cell] = []

        def add(coords: dict, train_ids, scope=None, **kw):
            idx = len(cells)
            cells.append(Cell(idx, coords, derive_seed(plan.seed, idx), tuple(train_ids), tuple(test_ids),
                              train_scope=scope if scope is not None else train_scope, test_scope=test_scope, **kw))

        if kind == "subset_sizes":
            for value in axis["values"]:
                sid = derive_seed(plan.seed, len(cells))
                sl = random_subsample(pool, value, sid)
                add({"subset": value}, sl.sample_ids, {**sl.spec.to_dict(), "within": train_scope})
        elif kind == "window_grid":
            if not isinstance(train_data, Trajectory):
                raise PlanValidationError("window_grid needs a trajectory")
            for win in window_grid(axis["sizes"], axis["starts"], axis.get("max_end", 1.0)):
                sl = time_window_slice(train_data, win.start_frac, win.size_frac)
                ids = sl.sample_ids
                samples = axis.get("samples")
                if samples is not None and samples < len(ids):
                    ids = random_subsample(ids, int(samples), derive_seed(plan.seed, len(cells))).sample_ids
                add({"start_frac": win.start_frac, "size_frac": win.size_frac}, ids, win.to_dict())
        elif kind == "rotation":
            step, count = float(axis.get("step_deg", 5.0)), int(axis.get("count", 36))
            if step * count > 360 + 1e-9:
                raise PlanValidationError(f"{count} rotation steps of {step} deg exceed a full turn")
            for k in range(count):
                add({"angle_deg": k * step}, pool, rotation_deg=k * step)
        elif kind == "bin_ranges":
            feature = axis.get("feature", "jet_energy")
            if feature != "jet_energy":
                raise PlanValidationError(f"unsupported bin feature {feature!r}")
            pool_events = [train_data.event(i) for i in pool]
            bins = bin_by_scalar(pool_events, lambda ev: ev.jet_energy, axis["lo"], axis["hi"], int(axis["n_bins"]))
            for selected in axis["selected"]:
                sl = equalized_bin_sample(bins, selected, int(axis["total"]), derive_seed(plan.seed, len(cells)))
                add({"bins": sorted(selected)}, sl.sample_ids,
                    {"kind": "feature_bins", "feature": feature, "lo": axis["lo"], "hi": axis["hi"],
                     "n_bins": axis["n_bins"], "selected": sorted(selected)})
        elif kind == "repetitions":
            for r in range(int(axis["count"])):
                add({"run": r}, pool, predictor_seed=derive_seed(plan.seed, r))
        else:  # pragma: no cover - validate_plan rejects this
            raise PlanValidationError(f"unknown axis {kind!r}")
    except SliceError as exc:
        raise PlanValidationError(str(exc)) from None
    return cells


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _lead_mean(values: list[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _com_delta(gt, pd) -> float | None:
    try:
        return center_of_mass_displacement(gt, pd).delta_r
    except ZeroMassError:
        return None


def evaluate_metric(workload: str, name: str, params: dict, samples: Sequence[Any], preds: PredictionSet | None) -> MetricReport:
    """One metric over one test slice, as a report keyed by sample id."""
    params = dict(params or {})
    if workload == "md":
        if name == "force_mae":
            return force_mae(samples, preds, bool(params.get("group_by_species", True)))
        if name == "energy_mae":
            return energy_mae(samples, preds, bool(params.get("per_atom", True)))
        if name == "energy_error":
            return energy_error_series(samples, preds, bool(params.get("per_atom", False)))
    elif workload == "jet":
        ids = [ev.event_id for ev in samples]
        scores = np.array([np.asarray(preds[i])[1] for i in ids])
        labels = [ev.label for ev in samples]
        if name == "accuracy":
            return classification_metrics(scores, labels, ids, float(params.get("threshold", 0.5)))
        if name == "auc":
            return auc_report(scores, labels, ids)
    else:
        return _precip_metric(name, params, samples, preds)
    raise ValueError(f"unknown metric {name!r} for workload {workload!r}")


def _precip_metric(name: str, params: dict, events: Sequence[PrecipEvent], preds: PredictionSet | None) -> MetricReport:
    if name == "cucsi":
        T = float(params.get("T", 16.0))
        grid = cucsi(events, preds, T, int(params.get("N", 30)), float(params.get("s", 0.015)))
        per_event = {}
        for ev in events:
            if ev.event_id in grid.event_ids:
                pd = np.asarray(preds[ev.event_id])
                per_event[ev.event_id] = _lead_mean([csi(ev.targets[i], pd[i], T) for i in range(ev.output_len)])
        return MetricReport("cucsi", per_event, params={"T": T, "N": grid.N, "s": grid.s}, extra={"grid": grid.to_dict()})
    if name == "differential_trend":
        per_event = {}
        for ev in events:
            i = int(params.get("i", 0))
            j = int(params.get("j", ev.shape[0] - 1))
            per_event[ev.event_id] = list(differential_trend(ev, preds[ev.event_id], i, j))
        return MetricReport("differential_trend", per_event, params=params)

    per_event: dict[int, float | None] = {}
    for ev in events:
        leads = params.get("leads") or list(range(ev.output_len))
        gt = ev.targets
        if name == "gt_mean_intensity":
            per_event[ev.event_id] = _lead_mean([mean_intensity(gt[k]) for k in leads])
            continue
        pd = np.asarray(preds[ev.event_id])
        if name == "mae":
            vals = [mae(gt[k], pd[k]) for k in leads]
        elif name == "active_mae":
            T_act = float(params.get("T_active", 5.0))
            vals = [active_area_mae(gt[k], pd[k], T_act, params.get("mask", "gt")) for k in leads]
        elif name == "com_displacement":
            vals = [_com_delta(gt[k], pd[k]) for k in leads]
        elif name == "csi":
            vals = [csi(gt[k], pd[k], float(params.get("T", 16.0))) for k in leads]
        elif name == "csi_avg":
            vals = [csi_avg(gt[k], pd[k]) for k in leads]
        else:
            raise ValueError(f"unknown precipitation metric {name!r}")
        per_event[ev.event_id] = _lead_mean(vals)
    return MetricReport(name, per_event, params=params)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def obtain_predictions(plan: SweepPlan, cell: Cell, train: Sequence[Any], test: Sequence[Any]) -> PredictionSet | None:
    spec = plan.predictor
    seed = cell.predictor_seed if cell.predictor_seed is not None else spec.get("seed")
    options = dict(spec.get("options") or {})
    if "toy" in spec:
        return toy_predict(spec["toy"], train, test, seed, **options)
    if "external" in spec:
        return run_external_predictor(
            [_expand(a, plan) for a in spec["external"]],
            test,
            plan.workload,
            train=train,
            seed=seed,
            config=options,
            timeout=float(spec.get("timeout", DEFAULT_TIMEOUT)),
        )
    path = plan.resolve(spec["file"].format(cell=cell.index))
    preds = load_predictions(path)
    preds.validate_against(test)
    return preds


def _expand(arg: str, plan: SweepPlan) -> str:
    return arg.replace("{plan_dir}", str(plan.base_dir))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _cell_dir(root: Path, index: int) -> Path:
    return root / "cells" / f"{index:04d}"


def _cell_complete(root: Path, cell: Cell, plan_hash: str) -> CellRecord | None:
    meta_path = _cell_dir(root, cell.index) / "cell.json"
    if not meta_path.exists():
        return None
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("plan_hash") != plan_hash or meta.get("status") != "ok":
            return None
        for rel in meta["reports"]:
            read_report(root / rel)
    except (OSError, ValueError, KeyError, DataFormatError):
        return None
    return CellRecord(cell.index, meta["coords"], "ok", list(meta["reports"]), skipped=True)


def _run_cell(plan: SweepPlan, root: Path, plan_hash: str, cell: Cell, train_data, test_data) -> CellRecord:
    done = _cell_complete(root, cell, plan_hash)
    if done is not None:
        return done
    started = time.perf_counter()
    cdir = _cell_dir(root, cell.index)
    train_map = samples_by_id(train_data) if train_data is not None else {}
    train = [train_map[i] for i in cell.train_ids]
    if cell.rotation_deg and plan.workload == "jet":
        test_data = rotate_dataset(test_data, math.radians(cell.rotation_deg))
    for t in plan.transforms:
        if t["kind"] == "rotate":
            test_data = rotate_dataset(test_data, math.radians(float(t.get("deg", 0.0))))
    test_map = samples_by_id(test_data)
    test = [test_map[i] for i in cell.test_ids]
    record = CellRecord(cell.index, cell.coords, "ok")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "plan_hash": plan_hash,
        "index": cell.index,
        "coords": cell.coords,
        "seed": cell.seed,
        "predictor": plan.predictor,
        "train_size": len(train),
        "test_size": len(test),
    }
    try:
        preds = obtain_predictions(plan, cell, train, test)
        reports = []
        for m in plan.metrics:
            rep = evaluate_metric(plan.workload, m["name"], m.get("params", {}), test, preds)
            rep.scope = {"cell": cell.index, "coords": cell.coords, "train": cell.train_scope,
                         "test": cell.test_scope, "train_size": len(train)}
            rel = f"cells/{cell.index:04d}/{m['name']}.json"
            write_report(rep, root / rel)
            reports.append(rel)
        record.reports = reports
    except Exception as exc:  # recorded, sweep continues
        log.warning("cell %d failed: %s", cell.index, exc)
        record.status = "failed"
        record.error = f"{type(exc).__name__}: {exc}"
        meta["traceback"] = traceback.format_exc(limit=5)
    meta.update(status=record.status, reports=record.reports, wall_time_s=round(time.perf_counter() - started, 6))
    if record.error:
        meta["error"] = record.error
    atomic_write_bytes(cdir / "cell.json", (canonical_json(meta) + "\n").encode("utf-8"))
    return record


def run_plan(
    plan: SweepPlan,
    workers: int = 1,
    out_dir: Path | None = None,
    on_cell: Callable[[CellRecord], None] | None = None,
) -> SweepResult:
    """Execute every cell of ``plan``; completed cells are skipped, failures recorded."""
    validate_plan(plan)
    root = Path(out_dir) if out_dir is not None else plan.out_path
    try:
        train_data = load_dataset(plan.workload, plan.resolve(plan.datasets["train"])) if "train" in plan.datasets else None
        test_path = plan.datasets.get("test", plan.datasets.get("train"))
        test_data = load_dataset(plan.workload, plan.resolve(test_path))
    except (OSError, DataFormatError) as exc:
        raise PlanValidationError(f"cannot load dataset: {exc}") from None
    cells = build_cells(plan, train_data, test_data)
    plan_hash = plan.plan_hash

    def job(cell: Cell) -> CellRecord:
        rec = _run_cell(plan, root, plan_hash, cell, train_data, test_data)
        if on_cell is not None:
            on_cell(rec)
        return rec

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(job, cells))
    else:
        records = [job(c) for c in cells]

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "plan_id": plan.plan_id,
        "plan_hash": plan_hash,
        "workload": plan.workload,
        "axis": plan.axis["kind"],
        "cells": [r.to_dict() for r in records],
    }
    manifest_path = root / "manifest.json"
    atomic_write_bytes(manifest_path, (canonical_json(manifest) + "\n").encode("utf-8"))
    return SweepResult(plan.plan_id, plan_hash, records, manifest_path)
