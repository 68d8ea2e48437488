import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from gvpmon.analytics import CoverageSample, write_coverage_csv
from gvpmon.cli import LEDGER_NAME, RunLedger, build_parser, main
from gvpmon.config import AppConfig, from_dict, load_config
from gvpmon.dataset import Label, format_frame_id, write_yolo_labels
from gvpmon.errors import InvalidConfig
from gvpmon.geometry import NormBox

T0 = 1704047400  # 2024-01-01 00:00 at +05:30
PY = sys.executable

COMMANDS = ["sample", "prep", "detect", "coverage", "eval", "profile", "events", "simulate", "report"]


def ledger(out):
    return RunLedger(Path(out) / LEDGER_NAME).records()


def make_frames(root: Path, n: int, step: int = 300):
    root.mkdir(parents=True, exist_ok=True)
    for k in range(n):
        (root / f"{format_frame_id(T0 + k * step)}.jpg").touch()


def make_labels(root: Path, n: int, step: int = 300):
    root.mkdir(parents=True, exist_ok=True)
    for k in range(n):
        write_yolo_labels(root / f"{format_frame_id(T0 + k * step)}.txt", [Label(0, NormBox(0.5, 0.5, 0.1, 0.1))])


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--days", "2", "--noiseless", "--out", str(out), "--quiet"]) == 0
    return out


# --- parser -------------------------------------------------------------------


def test_subcommands_present():
    text = build_parser().format_help()
    for cmd in COMMANDS:
        assert cmd in text


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_exits_zero_and_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--out", "--seed", "--tz-offset", "--quiet"):
        assert flag in text
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text


def test_global_flags_before_or_after_command():
    p = build_parser()
    a = p.parse_args(["--out", "x", "--seed", "3", "sample"])
    b = p.parse_args(["sample", "--out", "x", "--seed", "3"])
    assert (a.out, a.seed) == (b.out, b.seed) == ("x", 3)


def test_module_entry_point():
    r = subprocess.run([PY, "-m", "gvpmon", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout


# --- config --------------------------------------------------------------------------


def test_config_relative_paths_and_overrides(tmp_path):
    (tmp_path / "cfg.yaml").write_text(yaml.safe_dump({
        "paths": {"frames_dir": "frames", "out_dir": "out"},
        "roi": {"rect": [0, 0, 100, 100]},
        "detector": {"confidence_threshold": 0.4},
        "tz_offset_min": 0,
    }))
    cfg = load_config(tmp_path / "cfg.yaml")
    assert cfg.paths.frames_dir == tmp_path / "frames"
    assert cfg.detector.confidence_threshold == 0.4
    assert cfg.roi.area == 10000
    assert from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_config_errors():
    with pytest.raises(InvalidConfig):
        from_dict({"bogus": 1})
    with pytest.raises(InvalidConfig):
        from_dict({"roi": {"rect": [0, 0, 0, 10]}})
    with pytest.raises(InvalidConfig):
        from_dict({"frame": {"width": 0}})
    with pytest.raises(InvalidConfig):
        from_dict({"detector": {"nms_iou_threshold": 2}})


def test_config_digest_tracks_content():
    assert AppConfig().digest() == AppConfig().digest()
    assert AppConfig().digest() != AppConfig(tz_offset_min=0).digest()


# --- sample / prep ----------------------------------------------------------------------


def test_sample_fixture_day(tmp_path, capsys):
    make_frames(tmp_path / "frames", 288)
    out = tmp_path / "out"
    assert main(["sample", "--frames", str(tmp_path / "frames"), "--interval", "300", "--out", str(out)]) == 0
    lines = (out / "frames.txt").read_text().splitlines()
    assert len(lines) == 288
    assert lines[0].endswith("20240101_000000.jpg") or Path(lines[0]).stem == format_frame_id(T0)
    assert "sampled 288" in capsys.readouterr().out


def test_sample_empty_dir(tmp_path, capsys):
    (tmp_path / "frames").mkdir()
    assert main(["sample", "--frames", str(tmp_path / "frames"), "--out", str(tmp_path / "out")]) == 2
    assert "EmptySource" in capsys.readouterr().err
    assert ledger(tmp_path / "out")[-1]["exit_code"] == 2


def test_prep_split_and_flip(tmp_path, capsys):
    make_labels(tmp_path / "labels", 50)
    out = tmp_path / "out"
    assert main(["prep", "--labels", str(tmp_path / "labels"), "--flip-count", "10", "--out", str(out)]) == 0
    counts = json.loads(capsys.readouterr().out)
    assert (counts["train"], counts["test"], counts["augmented"], counts["total"]) == (40, 10, 10, 60)
    assert (out / "manifest.jsonl").exists() and (out / "manifest.jsonl.meta.json").exists()
    assert main(["prep", "--labels", str(tmp_path / "labels"), "--flip-count", "41", "--out", str(out)]) == 2


def test_prep_with_unlabeled_pool(tmp_path, capsys):
    make_frames(tmp_path / "frames", 30)
    make_labels(tmp_path / "labels", 10)
    out = tmp_path / "out"
    assert main(["sample", "--frames", str(tmp_path / "frames"), "--out", str(out), "--quiet"]) == 0
    assert main(["prep", "--labels", str(tmp_path / "labels"), "--frame-list", str(out / "frames.txt"),
                 "--flip-count", "4", "--out", str(out)]) == 0
    counts = json.loads(capsys.readouterr().out)
    assert (counts["annotated"], counts["unlabeled"], counts["total"]) == (10, 20, 34)


# --- detect ---------------------------------------------------------------------------


def test_detect_with_adapter(tmp_path):
    make_frames(tmp_path / "frames", 5)
    out = tmp_path / "out"
    assert main(["sample", "--frames", str(tmp_path / "frames"), "--out", str(out), "--quiet"]) == 0
    adapter = f"{PY} -m gvpmon.adapters.empty"
    assert main(["detect", "--adapter", adapter, "--out", str(out), "--quiet"]) == 0
    lines = (out / "detections.jsonl").read_text().splitlines()
    assert len(lines) == 5 and json.loads(lines[0])["boxes"] == []


def test_detect_adapter_crash_exit_3(tmp_path):
    make_frames(tmp_path / "frames", 2)
    out = tmp_path / "out"
    main(["sample", "--frames", str(tmp_path / "frames"), "--out", str(out), "--quiet"])
    code = main(["detect", "--adapter", f"{PY} -c 'import sys; sys.exit(1)'", "--out", str(out), "--quiet"])
    assert code == 3
    assert ledger(out)[-1]["error"].startswith("AdapterCrashed")


def test_detect_io_error_exit_4(tmp_path):
    (tmp_path / "dets").mkdir()
    assert main(["detect", "--detections", str(tmp_path / "dets"), "--out", str(tmp_path / "out"), "--quiet"]) == 4


def test_detect_missing_input_exit_2(tmp_path):
    assert main(["detect", "--detections", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "out")]) == 2


def test_bad_config_exit_2(tmp_path):
    (tmp_path / "c.yaml").write_text("bogus: 1\n")
    assert main(["coverage", "--config", str(tmp_path / "c.yaml"), "--out", str(tmp_path / "out")]) == 2
    assert main(["coverage", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "out")]) == 2
    assert len(ledger(tmp_path / "out")) == 2


# --- simulated round trip ---------------------------------------------------------------


def test_simulate_outputs(sim):
    for name in ("detections.jsonl", "labels", "coverage_truth.csv", "events_truth.jsonl",
                 "scenario.yaml", "pipeline.yaml", "expected.json"):
        assert (sim / name).exists(), name
    pipe = yaml.safe_load((sim / "pipeline.yaml").read_text())
    assert pipe["detector"]["nms_iou_threshold"] == 1.0
    assert json.loads((sim / "expected.json").read_text())["frames"] == 576


def test_noiseless_eval_table(sim, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["eval", "--config", str(sim / "pipeline.yaml"), "--out", str(out), "--name", "sim"]) == 0
    table = (out / "eval_table.txt").read_text()
    for row in ("Precision", "Recall", "F1-Score", "mAP@50"):
        line = next(l for l in table.splitlines() if l.startswith(f"| {row}"))
        assert line.split("|")[2].strip() == "1.00"
    rep = json.loads((out / "eval.json").read_text())
    assert rep["precision"] == rep["recall"] == rep["map50"] == 1.0


def test_pipeline_reproduces_truth_coverage(sim, tmp_path):
    out = tmp_path / "out"
    cfg = str(sim / "pipeline.yaml")
    assert main(["coverage", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    assert (out / "coverage.csv").read_text() == (sim / "coverage_truth.csv").read_text()


def test_commands_are_idempotent(sim, tmp_path):
    cfg = str(sim / "pipeline.yaml")
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["report", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        assert main(["simulate", "--days", "1", "--seed", "3", "--out", str(out / "sim"), "--quiet"]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file() and p.name != LEDGER_NAME)
    assert len(files) > 20
    for rel in files:
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel


def test_ledger_one_record_per_invocation(sim, tmp_path):
    out = tmp_path / "out"
    cfg = str(sim / "pipeline.yaml")
    main(["coverage", "--config", cfg, "--out", str(out), "--quiet"])
    first = (out / LEDGER_NAME).read_text()
    main(["events", "--config", cfg, "--out", str(out), "--quiet"])
    main(["eval", "--config", cfg, "--out", str(out), "--labels", str(tmp_path / "none"), "--quiet"])
    recs = ledger(out)
    assert [r["command"] for r in recs] == ["coverage", "events", "eval"]
    assert [r["exit_code"] for r in recs] == [0, 0, 2]
    assert len({r["run_id"] for r in recs}) == 3
    assert (out / LEDGER_NAME).read_text().startswith(first)
    assert recs[0]["outputs"] == ["coverage.csv"]
    assert all(r["end_ts"] >= r["start_ts"] and r["config_hash"] for r in recs)


def test_profile_constant_series(tmp_path):
    cov = tmp_path / "cov.csv"
    with open(cov, "w") as fh:
        write_coverage_csv([CoverageSample(T0 + 300 * k, 0.39, 1) for k in range(288)], fh)
    out = tmp_path / "out"
    assert main(["profile", "--kind", "hourly", "--coverage", str(cov), "--out", str(out), "--quiet"]) == 0
    prof = json.loads((out / "profile_hourly.json").read_text())
    assert len(prof["bins"]) == 24
    assert all(b["mean"] == pytest.approx(0.39) for b in prof["bins"])


def test_tz_offset_flag_overrides_config(tmp_path):
    cov = tmp_path / "cov.csv"
    with open(cov, "w") as fh:
        write_coverage_csv([CoverageSample(T0, 0.5, 1)], fh)
    out = tmp_path / "out"
    assert main(["profile", "--kind", "hourly", "--coverage", str(cov), "--tz-offset", "0", "--out", str(out), "--quiet"]) == 0
    bins = json.loads((out / "profile_hourly.json").read_text())["bins"]
    assert [b["key"] for b in bins if not b["empty"]] == ["18"]


def test_events_from_truth_coverage(sim, tmp_path):
    out = tmp_path / "out"
    assert main(["events", "--coverage", str(sim / "coverage_truth.csv"), "--out", str(out), "--quiet"]) == 0
    events = [json.loads(l) for l in (out / "events.jsonl").read_text().splitlines()]
    assert sum(e["kind"] == "clear" for e in events) == 2
