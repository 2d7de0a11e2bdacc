"""Command-line front end: ``saibench gen|slice|eval|sweep|trace|render``.

Settings resolve as flags > ``SAIBENCH_*`` environment variables > the
JSON file given by ``--config`` > built-in defaults. Exit codes: 0 on
success, 2 for usage or plan errors, 3 when a predictor fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .core import (
    WORKLOADS,
    DataFormatError,
    MetricReport,
    atomic_write_bytes,
    canonical_json,
    load_predictions,
    read_report,
    write_jet_dataset,
    write_precip_dataset,
    write_report,
    write_trajectory,
)
from .harness import (
    RENDER_KINDS,
    PlanValidationError,
    PredictorError,
    RenderError,
    EmptyJoinError,
    evaluate_metric,
    load_plan,
    merge_reports,
    run_plan,
    trace_errors,
    write_rendering,
)
from .harness.plan import METRICS_BY_WORKLOAD
from .harness.runner import load_dataset, samples_by_id
from .sampling import (
    FeatureBins,
    RandomSubset,
    SliceError,
    ThresholdResponsive,
    TimeWindow,
    bin_by_scalar,
    equalized_bin_sample,
    random_subsample,
    slice_spec_from_dict,
    threshold_responsive_subset,
    time_window_slice,
)
from .synth import TOY_KINDS, MdToyParams, gen_jet_toy, gen_md_toy, gen_precip_dataset, toy_predict

log = logging.getLogger("saibench")

EXIT_OK, EXIT_USAGE, EXIT_PREDICTOR = 0, 2, 3
ENV_PREFIX = "SAIBENCH_"
DEFAULT_TOY = {"md": "knn_forces", "jet": "linear_tagger", "precip": "advection_extrapolator"}


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    out: str = "out"
    workers: int = 1
    seed: int = 0
    format: str = "text"
    log_level: str = "WARNING"

    def __post_init__(self):
        self.workers = int(self.workers)
        self.seed = int(self.seed)
        if self.workers < 1:
            raise UsageError(f"workers must be >= 1, got {self.workers}")
        if self.format not in ("text", "json"):
            raise UsageError(f"format must be 'text' or 'json', got {self.format!r}")


_SETTINGS = ("out", "workers", "seed", "format", "log_level")


def resolve_config(args: argparse.Namespace, env: Mapping[str, str]) -> CliConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - set(_SETTINGS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        values.update(doc)
    for key in _SETTINGS:
        if ENV_PREFIX + key.upper() in env:
            values[key] = env[ENV_PREFIX + key.upper()]
    for key in _SETTINGS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        return CliConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad setting: {exc}") from None


def _json_arg(text: str | None, what: str) -> dict:
    if not text:
        return {}
    try:
        src = Path(text).read_text(encoding="utf-8") if not text.lstrip().startswith("{") else text
        doc = json.loads(src)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{what}: not a JSON object or file ({exc})") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{what}: expected a JSON object")
    return doc


def _emit(cfg: CliConfig, payload: dict, text: str) -> None:
    print(canonical_json(payload) if cfg.format == "json" else text, flush=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args, cfg: CliConfig) -> int:
    out = Path(cfg.out)
    name = args.name or {"md": "trajectory", "jet": "jets", "precip": "precip"}[args.workload]
    if args.workload == "md":
        kw = {"seed": cfg.seed}
        if args.count:
            kw["n_frames"] = args.count
        traj = gen_md_toy(MdToyParams(**kw))
        path = out / f"{name}.jsonl"
        write_trajectory(traj, path)
        n = len(traj)
    elif args.workload == "jet":
        ds = gen_jet_toy(args.count or 2000, cfg.seed, name=name)
        path = out / f"{name}.jsonl"
        write_jet_dataset(ds, path)
        n = len(ds)
    else:
        events = gen_precip_dataset(args.count or 50, cfg.seed)
        path = out / name / "manifest.json"
        write_precip_dataset(events, path)
        n = len(events)
    _emit(cfg, {"event": "gen", "workload": args.workload, "path": str(path), "samples": n},
          f"wrote {n} {args.workload} samples to {path}")
    return EXIT_OK


def cmd_slice(args, cfg: CliConfig) -> int:
    data = load_dataset(args.workload, Path(args.dataset))
    spec = slice_spec_from_dict(_json_arg(args.spec, "--spec"))
    ids = sorted(samples_by_id(data))
    if isinstance(spec, TimeWindow):
        if args.workload != "md":
            raise UsageError("time_window slices apply to md trajectories")
        result = time_window_slice(data, spec.start_frac, spec.size_frac)
    elif isinstance(spec, RandomSubset):
        result = random_subsample(ids, spec.count if spec.count is not None else spec.fraction, spec.seed)
    elif isinstance(spec, FeatureBins):
        if args.workload != "jet":
            raise UsageError("feature_bins slices apply to jet datasets (binned on jet energy)")
        bins = bin_by_scalar(list(data.events), lambda ev: ev.jet_energy, spec.lo, spec.hi, spec.n_bins)
        total = args.total if args.total is not None else sum(len(bins[b]) for b in spec.selected)
        result = equalized_bin_sample(bins, spec.selected, total, cfg.seed)
    elif isinstance(spec, ThresholdResponsive):
        if not args.predictions:
            raise UsageError("threshold_responsive slices need --predictions")
        result = threshold_responsive_subset(data, load_predictions(args.predictions), spec.T)
    else:  # pragma: no cover
        raise UsageError(f"unsupported slice {spec!r}")
    path = Path(cfg.out) / (args.name + ".json")
    atomic_write_bytes(path, (canonical_json(result.to_dict()) + "\n").encode("utf-8"))
    _emit(cfg, {"event": "slice", "path": str(path), "samples": len(result)},
          f"selected {len(result)} samples -> {path}")
    return EXIT_OK


def cmd_eval(args, cfg: CliConfig) -> int:
    data = load_dataset(args.workload, Path(args.dataset))
    samples = list(samples_by_id(data).values())
    if args.predictions:
        preds = load_predictions(args.predictions)
        preds.validate_against(samples)
    else:
        train = list(samples_by_id(load_dataset(args.workload, Path(args.train))).values()) if args.train else []
        kind = args.toy or DEFAULT_TOY[args.workload]
        preds = toy_predict(kind, train, samples, args.predictor_seed)
    params = _json_arg(args.params, "--params")
    names = args.metric or sorted(METRICS_BY_WORKLOAD[args.workload])
    for name in names:
        if name not in METRICS_BY_WORKLOAD[args.workload]:
            raise UsageError(f"unknown metric {name!r} for {args.workload}")
        report = evaluate_metric(args.workload, name, params, samples, preds)
        path = Path(cfg.out) / f"{name}.json"
        write_report(report, path)
        _emit(cfg, {"event": "report", "metric": name, "path": str(path), "aggregates": report.aggregates},
              f"{name}: mean={report.aggregates.get('mean')} n={report.aggregates.get('count')} -> {path}")
    return EXIT_OK


def cmd_sweep(args, cfg: CliConfig) -> int:
    plan = load_plan(args.plan)
    out = Path(args.out) if args.out is not None else plan.out_path

    def progress(rec):
        if cfg.format == "json":
            print(canonical_json({"event": "cell", **rec.to_dict(), "skipped": rec.skipped}), flush=True)

    result = run_plan(plan, workers=cfg.workers, out_dir=out, on_cell=progress)
    failed = result.failed
    summary = {"event": "sweep", "plan_id": result.plan_id, "plan_hash": result.plan_hash,
               "cells": len(result.cells), "failed": len(failed), "manifest": str(result.manifest_path)}
    if cfg.format == "json":
        print(canonical_json(summary), flush=True)
    else:
        print(f"{plan.plan_id}: {len(result.cells) - len(failed)}/{len(result.cells)} cells ok -> {result.manifest_path}")
        for rec in failed:
            print(f"  cell {rec.index} {rec.coords}: {rec.error}", file=sys.stderr)
    return EXIT_PREDICTOR if failed else EXIT_OK


def _gather_reports(paths: Sequence[str]) -> list[MetricReport]:
    """Read report files; directories contribute every report found below them."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(f for f in p.rglob("*.json") if f.name not in ("cell.json", "manifest.json"))
        else:
            files.append(p)
    if not files:
        raise UsageError("no report files given")
    by_name: dict[str, list[MetricReport]] = {}
    for f in files:
        rep = read_report(f)
        by_name.setdefault(rep.metric_name, []).append(rep)
    return [reps[0] if len(reps) == 1 else merge_reports(reps) for reps in by_name.values()]


def cmd_trace(args, cfg: CliConfig) -> int:
    reports = _gather_reports(args.reports)
    joins = []
    for j in args.join:
        x, sep, y = j.partition(":")
        if not sep or not x or not y:
            raise UsageError(f"--join expects X:Y, got {j!r}")
        joins.append((x, y))
    try:
        result = trace_errors(reports, joins)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    out = Path(cfg.out)
    atomic_write_bytes(out / f"{args.name}.json", (canonical_json(result.to_dict()) + "\n").encode("utf-8"))
    lines = [",".join(["sample_id"] + result.columns)]
    lines += [",".join([str(r[0])] + [repr(v) for v in r[1:]]) for r in result.rows]
    atomic_write_bytes(out / f"{args.name}.csv", ("\n".join(lines) + "\n").encode("utf-8"))
    for c in result.correlations:
        _emit(cfg, {"event": "correlation", **c.to_dict()},
              f"{c.y_name} ~ {c.x_name}: r={c.pearson_r:.4f} slope={c.slope:.4g} intercept={c.intercept:.4g} n={c.n}")
    return EXIT_OK


def cmd_render(args, cfg: CliConfig) -> int:
    reports = [read_report(p) for p in args.reports]
    svg, csv = write_rendering(reports, args.kind, Path(cfg.out) / args.name, args.bins)
    _emit(cfg, {"event": "render", "svg": str(svg), "csv": str(csv)}, f"wrote {svg} and {csv}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saibench", description="Structural-interpretation benchmarking toolkit.")
    parser.add_argument("--version", action="version", version=f"saibench {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file (out, workers, seed, format, log_level)")
    common.add_argument("--out", help="output directory; nothing is written outside it")
    common.add_argument("--seed", type=int, help="seed for generation and sampling")
    common.add_argument("--workers", type=int, help="parallel sweep cells")
    common.add_argument("--format", choices=("text", "json"), help="json prints one JSON line per event")
    common.add_argument("--log-level", dest="log_level", help="logging level name")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="write a synthetic toy dataset")
    p.add_argument("workload", choices=WORKLOADS)
    p.add_argument("--count", type=int, help="frames (md) or events (jet, precip)")
    p.add_argument("--name", help="output file stem")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("slice", parents=[common], help="apply a slice spec to a dataset")
    p.add_argument("workload", choices=WORKLOADS)
    p.add_argument("dataset", help="trajectory/jet JSONL or precipitation manifest")
    p.add_argument("--spec", required=True, help="slice spec as inline JSON or a file path")
    p.add_argument("--predictions", help="prediction file (threshold_responsive slices)")
    p.add_argument("--total", type=int, help="sample total for feature_bins slices")
    p.add_argument("--name", default="slice", help="output file stem")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("eval", parents=[common], help="compute metric reports for one dataset")
    p.add_argument("workload", choices=WORKLOADS)
    p.add_argument("dataset")
    p.add_argument("--predictions", help="prediction JSONL; otherwise a toy predictor runs in-process")
    p.add_argument("--toy", choices=TOY_KINDS)
    p.add_argument("--train", help="training dataset for the toy predictor")
    p.add_argument("--predictor-seed", dest="predictor_seed", type=int)
    p.add_argument("--metric", action="append", help="metric name; repeatable (default: all for the workload)")
    p.add_argument("--params", help="metric params as inline JSON or a file path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="run every cell of a sweep plan")
    p.add_argument("--plan", required=True, help="sweep plan JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", parents=[common], help="correlate per-sample values across reports")
    p.add_argument("--reports", nargs="+", required=True, help="report files or directories")
    p.add_argument("--join", action="append", required=True, help="metric pair X:Y; repeatable")
    p.add_argument("--name", default="trace", help="output file stem")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("render", parents=[common], help="draw reports as SVG plus CSV")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--kind", choices=RENDER_KINDS, required=True)
    p.add_argument("--bins", type=int, default=16, help="histogram bins when the report carries none")
    p.add_argument("--name", default="figure", help="output file stem")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Sequence[str] | None = None, env: Mapping[str, str] | None = None) -> int:
    env = os.environ if env is None else env
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args, env)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(cfg.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, cfg)
    except (UsageError, PlanValidationError, SliceError, RenderError, EmptyJoinError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PredictorError as exc:
        print(f"predictor failed: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except (OSError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
