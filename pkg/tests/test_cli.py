from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from saibench.cli import build_parser, main, resolve_config

SUBCOMMANDS = ["gen", "slice", "eval", "sweep", "trace", "render"]


def _files(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_exits_zero(cmd, capsys):
    assert main([cmd, "--help"], env={}) == 0
    assert "usage" in capsys.readouterr().out


def test_usage_errors_exit_2(capsys):
    assert main([], env={}) == 2
    assert main(["gen", "bio"], env={}) == 2
    assert main(["gen", "md", "--workers", "0"], env={}) == 2
    assert "usage" in capsys.readouterr().err


def test_gen_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["gen", "md", "--seed", "1", "--count", "50", "--out", str(tmp_path / d)], env={}) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    assert main(["gen", "md", "--seed", "2", "--count", "50", "--out", str(tmp_path / "c")], env={}) == 0
    assert _files(tmp_path / "a") != _files(tmp_path / "c")


def test_gen_writes_only_inside_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "o"
    for wl in ("md", "jet", "precip"):
        assert main(["gen", wl, "--count", "10", "--out", str(out)], env={}) == 0
    assert {p.name for p in tmp_path.iterdir()} == {"o"}


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "workers": 2, "out": "from-file"}))
    parser = build_parser()
    args = parser.parse_args(["gen", "md", "--config", str(cfg)])
    assert resolve_config(args, {}).seed == 1
    assert resolve_config(args, {"SAIBENCH_SEED": "5"}).seed == 5
    args = parser.parse_args(["gen", "md", "--config", str(cfg), "--seed", "9"])
    c = resolve_config(args, {"SAIBENCH_SEED": "5", "SAIBENCH_WORKERS": "3"})
    assert (c.seed, c.workers, c.out) == (9, 3, "from-file")
    assert resolve_config(parser.parse_args(["gen", "md"]), {}).out == "out"


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["gen", "md", "--config", str(cfg)], env={}) == 2


def test_invalid_plan_exit_2(tmp_path, capsys):
    plan = tmp_path / "p.json"
    plan.write_text(json.dumps({"plan_id": "x", "workload": "md", "datasets": {}, "axis": {}, "predictor": {},
                                "metrics": []}))
    assert main(["sweep", "--plan", str(plan)], env={}) == 2
    assert "plan needs" in capsys.readouterr().err


def test_predictor_failure_exit_3(tmp_path):
    assert main(["gen", "md", "--count", "100", "--out", str(tmp_path)], env={}) == 0
    bad = tmp_path / "bad.py"
    bad.write_text("import sys; sys.exit(1)\n")
    plan = tmp_path / "p.json"
    plan.write_text(json.dumps({"plan_id": "x", "workload": "md", "datasets": {"train": "trajectory.jsonl"},
                                "axis": {"kind": "repetitions", "count": 1},
                                "predictor": {"external": [sys.executable, str(bad)], "timeout": 5},
                                "metrics": [{"name": "force_mae"}]}))
    assert main(["sweep", "--plan", str(plan), "--out", str(tmp_path / "run")], env={}) == 3


def test_slice_and_eval(tmp_path):
    out = str(tmp_path)
    assert main(["gen", "jet", "--count", "60", "--out", out, "--name", "train"], env={}) == 0
    assert main(["gen", "jet", "--count", "40", "--seed", "1", "--out", out, "--name", "test"], env={}) == 0
    spec = json.dumps({"kind": "feature_bins", "feature": "jet_energy", "lo": 550, "hi": 2440, "n_bins": 2,
                       "selected": [0, 1]})
    assert main(["slice", "jet", str(tmp_path / "train.jsonl"), "--spec", spec, "--total", "10", "--out", out],
                env={}) == 0
    sl = json.loads((tmp_path / "slice.json").read_text())
    assert len(sl["sample_ids"]) == 10
    assert main(["eval", "jet", str(tmp_path / "test.jsonl"), "--train", str(tmp_path / "train.jsonl"),
                 "--metric", "auc", "--out", out, "--format", "json"], env={}) == 0
    assert json.loads((tmp_path / "auc.json").read_text())["extra"]["auc"] > 0.8
    bad = json.dumps({"kind": "time_window", "start_frac": 0, "size_frac": 0.5})
    assert main(["slice", "jet", str(tmp_path / "train.jsonl"), "--spec", bad, "--out", out], env={}) == 2


def test_full_pipeline_json_progress(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["gen", "precip", "--count", "12", "--seed", "4", "--out", str(out)], env={}) == 0
    plan = out / "plan.json"
    plan.write_text(json.dumps({
        "plan_id": "p", "workload": "precip", "datasets": {"test": "precip/manifest.json"},
        "axis": {"kind": "repetitions", "count": 2}, "predictor": {"toy": "advection_extrapolator"},
        "metrics": [{"name": "mae"}, {"name": "gt_mean_intensity"}, {"name": "cucsi"}], "output_dir": "run",
    }))
    capsys.readouterr()
    assert main(["sweep", "--plan", str(plan), "--format", "json", "--workers", "2"], env={}) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [l["event"] for l in lines] == ["cell", "cell", "sweep"]
    manifest = json.loads((out / "run" / "manifest.json").read_text())
    assert manifest["plan_hash"] == lines[-1]["plan_hash"]
    cell0 = out / "run" / "cells" / "0000"
    assert main(["trace", "--reports", str(cell0), "--join", "gt_mean_intensity:mae", "--out", str(out / "t")],
                env={}) == 0
    assert (out / "t" / "trace.csv").exists()
    assert main(["render", "--reports", str(cell0 / "cucsi.json"), "--kind", "grid-heatmap", "--out", str(out / "f")],
                env={}) == 0
    assert (out / "f" / "figure.svg").read_text().startswith("<svg")
    assert main(["trace", "--reports", str(cell0), "--join", "mae", "--out", str(out / "t")], env={}) == 2
