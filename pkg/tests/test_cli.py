import csv
import json
from pathlib import Path

import pytest

from trafficjoint import cli
from trafficjoint.cli import load_config, main

FAST_YAML = """\
paths:
  dataset: data
  models: models
  reports: reports
data:
  split: 24.0
  seeds: [0, 1]
predictor:
  epochs: 100
classifier:
  epochs: 100
experiment:
  alphas: [0.0, 1.0, 5.0]
"""


def _files(directory: Path) -> dict[str, bytes]:
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


@pytest.fixture
def workdir(tmp_path):
    assert main(["generate", "--duration", "60", "--seeds", "0", "1", "--out", str(tmp_path / "data")]) == 0
    (tmp_path / "run.yaml").write_text(FAST_YAML)
    return tmp_path


def test_generate_layout_and_rerun(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["generate", "--duration", "10", "--seeds", "0", "1", "2", "3", "--out", str(out)]) == 0
    first = _files(out)
    assert len(first) == 13 and "manifest.json" in first
    assert sum(name.endswith(".csv") for name in first) == 12
    manifest = json.loads(first["manifest.json"])
    assert [c["name"] for c in manifest["classes"]] == ["VO", "VI", "GM"]

    assert main(["generate", "--duration", "10", "--seeds", "0", "1", "2", "3", "--out", str(out)]) == 1
    assert "--force" in capsys.readouterr().err
    assert main(["generate", "--duration", "10", "--seeds", "0", "1", "2", "3", "--out", str(out), "--force"]) == 0
    assert _files(out) == first


def test_generate_unwritable_target(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    target = blocker / "sub"
    assert main(["generate", "--duration", "5", "--out", str(target)]) == 2
    assert str(target) in capsys.readouterr().err


def test_train_outputs_and_determinism(workdir):
    cfg = str(workdir / "run.yaml")
    assert main(["train", "--config", cfg]) == 0
    models = workdir / "models"
    got = _files(models)
    assert sorted(got) == [
        "bank/bank.json",
        "bank/predictor_0_VO.json",
        "bank/predictor_1_VI.json",
        "bank/predictor_2_GM.json",
        "classifier.json",
        "models.json",
    ]
    assert main(["train", "--config", cfg]) == 1
    assert main(["train", "--config", cfg, "--force"]) == 0
    assert _files(models) == got


def test_train_missing_class(workdir, capsys):
    mpath = workdir / "data" / "manifest.json"
    m = json.loads(mpath.read_text())
    m["traces"] = [t for t in m["traces"] if t["label"] != "GM"]
    mpath.write_text(json.dumps(m))
    assert main(["train", "--config", str(workdir / "run.yaml")]) == 2
    assert "GM" in capsys.readouterr().err


def test_evaluate_scenarios(workdir):
    assert main(["evaluate", "--config", str(workdir / "run.yaml"), "--mode", "scenarios"]) == 0
    rep = workdir / "reports"
    rows = list(csv.DictReader(open(rep / "scenario_results.csv")))
    assert [r["scenario"] for r in rows] == ["A", "B", "C"]
    assert len(list(csv.DictReader(open(rep / "scenario_results_by_seed.csv")))) == 6
    assert (rep / "predictions_seed0.csv").exists() and (rep / "predictions_seed1.csv").exists()


def test_evaluate_alpha_sweep_and_manifest_reload(workdir):
    assert main(["evaluate", "--config", str(workdir / "run.yaml"), "--mode", "alpha-sweep"]) == 0
    rep = workdir / "reports"
    rows = list(csv.DictReader(open(rep / "alpha_sweep.csv")))
    assert [float(r["alpha"]) for r in rows] == [0.0, 1.0, 5.0]
    assert len(list(csv.DictReader(open(rep / "alpha_sweep_by_seed.csv")))) == 6
    assert (rep / "dt_only_baseline.csv").exists()

    again = load_config(rep / "run_manifest_alpha-sweep.json")
    orig = load_config(workdir / "run.yaml")
    assert again.experiment == orig.experiment
    assert again.alphas == orig.alphas and again.seeds == orig.seeds
    assert again.dataset.resolve() == orig.dataset.resolve()


def test_evaluate_joint_logs(workdir):
    cfg = str(workdir / "run.yaml")
    assert main(["evaluate", "--config", cfg, "--mode", "joint", "--seeds", "0"]) == 0
    logs = sorted((workdir / "reports").glob("decisions_*.csv"))
    assert [p.name for p in logs] == ["decisions_GM_2.csv", "decisions_VI_1.csv", "decisions_VO_0.csv"]
    rows = list(csv.DictReader(open(logs[0])))
    assert len(rows) == (60 - 24) * 2
    assert set(rows[0]) >= {"window_index", "x_t", "dt_0", "da_2", "decision", "truth"}


def test_evaluate_joint_single_flow(workdir, capsys):
    cfg = str(workdir / "run.yaml")
    flow = str(workdir / "data" / "VI_seed1.csv")
    assert main(["evaluate", "--config", cfg, "--mode", "joint", "--flow", flow]) == 1
    assert main(["evaluate", "--config", cfg, "--mode", "joint", "--flow", flow, "--label", "XX"]) == 1
    assert main(["evaluate", "--config", cfg, "--mode", "joint", "--flow", flow, "--label", "VI"]) == 0
    assert (workdir / "reports" / "decisions_VI_seed1.csv").exists()


def test_features_dump(workdir):
    out = workdir / "feat"
    trace = str(workdir / "data" / "VO_seed0.csv")
    assert main(["features", "dump", "--trace", trace, "--out", str(out)]) == 0
    feats = list(csv.reader(open(out / "VO_seed0_features.csv")))
    series = list(csv.reader(open(out / "VO_seed0_series.csv")))
    # no declared duration, so the trailing partial window is dropped
    assert len(feats) - 1 in (119, 120)
    assert [r[0] for r in feats[1:]] == [str(k) for k in range(len(feats) - 1)]
    assert len(series) - 1 >= 5 * (len(feats) - 1)


def test_config_errors_carry_line_numbers(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("data:\n  split: 10\n  bogus: 3\n")
    assert main(["train", "--config", str(bad)]) == 1
    assert "bad.yaml:3: data.bogus: unknown key" in capsys.readouterr().err

    bad.write_text("windowing:\n  class_window: 0.5\n  pred_bin: 0.3\n")
    assert main(["train", "--config", str(bad)]) == 1
    assert "bad.yaml:1: windowing" in capsys.readouterr().err

    bad.write_text("experiment:\n  alphas: [1.0, 2.0]\n")
    assert main(["evaluate", "--config", str(bad), "--mode", "alpha-sweep"]) == 1
    assert "bad.yaml:2: experiment.alphas" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--mode", "nope"])
    assert exc.value.code == 1


def test_missing_dataset_is_data_error(tmp_path, capsys):
    assert main(["train", "--dataset", str(tmp_path / "none"), "--models", str(tmp_path / "m")]) == 2
    assert "manifest" in capsys.readouterr().err


def test_corrupt_trace_reports_line(workdir, capsys):
    path = workdir / "data" / "VO_seed0.csv"
    lines = path.read_text().splitlines()
    lines[3] = "oops,1,U,UDP"
    path.write_text("\n".join(lines) + "\n")
    assert main(["train", "--config", str(workdir / "run.yaml")]) == 2
    assert ":4" in capsys.readouterr().err


def test_run_config_roundtrip(tmp_path):
    cfg = load_config(None)
    p = tmp_path / "m.json"
    p.write_text(json.dumps(cfg.to_dict()))
    again = load_config(p)
    assert again.experiment == cfg.experiment and again.alphas == cfg.alphas
    assert cli.RunConfig().seeds == (0, 1, 2, 3, 4)
