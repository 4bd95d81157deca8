import json
import os
from pathlib import Path

import pandas as pd
import pytest
import yaml

import cli.commands
from cli import main
from tests.episode_builders import saved_dataset
from utils.exceptions import (InvalidArgumentError, OutOfRangeError, UnsupportedVariantError, TrainingAbortError,
                              ExpertLostError, OffRouteError, StalePlanError)

TINY = ["--set", "model.preset=tiny", "--set", "train.max_steps=2", "--set", "train.eval_every=1",
        "--set", "train.batch_size=4"]


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    return saved_dataset(str(tmp_path_factory.mktemp("cli-dataset")))


@pytest.fixture(scope="module")
def checkpoint(dataset_dir, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli-train"))
    assert main(TINY + ["train", "--dataset", dataset_dir, "--output", out]) == 0
    return os.path.join(out, "best.ckpt")


def test_training_writes_checkpoint_and_run_files(checkpoint):
    folder = os.path.dirname(checkpoint)
    assert os.path.isfile(checkpoint)
    assert os.path.isfile(os.path.join(folder, "loss_curves.csv"))
    meta = json.loads(Path(folder, "run_meta.json").read_text())
    assert meta["command"] == "train" and meta["seed"] == 0 and meta["variant"] == "M0"
    assert meta["version"]
    resolved = yaml.safe_load(Path(folder, "resolved_config.yaml").read_text())
    assert resolved["model"]["preset"] == "tiny"
    assert resolved["train"]["max_steps"] == 2


def test_open_loop_evaluation(dataset_dir, checkpoint, tmp_path):
    code = main(TINY + ["eval-open", "--dataset", dataset_dir, "--checkpoints", checkpoint, checkpoint,
                        "--names", "full", "again", "--output", str(tmp_path)])
    assert code == 0
    table = pd.read_csv(tmp_path / "metrics_table.csv")
    assert list(table["model"]) == ["full", "again"]
    assert table.loc[0, "e_ad"] == pytest.approx(table.loc[1, "e_ad"])
    for name in ("by_weather_full.csv", "by_command_full.csv", "horizon_full.csv", "style_full.csv",
                 "samples_full.csv"):
        assert (tmp_path / name).is_file()
    assert len(pd.read_csv(tmp_path / "horizon_full.csv")) == 22


def test_diagnostic_dumps(dataset_dir, checkpoint, tmp_path):
    assert main(["dump-attention", "--checkpoint", checkpoint, "--dataset", dataset_dir, "--samples", "2",
                 "--output", str(tmp_path / "attention")]) == 0
    table = pd.read_csv(tmp_path / "attention" / "attention.csv")
    assert len(table) == 2
    assert table[[f"w_{k}" for k in range(12)]].sum(axis=1).round(6).eq(1.0).all()

    assert main(["dump-features", "--checkpoint", checkpoint, "--dataset", dataset_dir,
                 "--output", str(tmp_path / "features")]) == 0
    assert len([f for f in os.listdir(tmp_path / "features") if f.endswith(".ppm")]) == 3


def test_report_gathers_tables(dataset_dir, checkpoint, tmp_path):
    evaluated = tmp_path / "open"
    assert main(["eval-open", "--dataset", dataset_dir, "--checkpoints", checkpoint,
                 "--output", str(evaluated)]) == 0
    assert main(["report", str(evaluated), "--output", str(tmp_path / "report")]) == 0
    text = (tmp_path / "report" / "report.md").read_text()
    assert "Open-loop metrics" in text and "e_ad" in text


def test_data_errors_exit_3(dataset_dir, tmp_path):
    missing = str(tmp_path / "missing.ckpt")
    assert main(["eval-open", "--dataset", dataset_dir, "--checkpoints", missing,
                 "--output", str(tmp_path)]) == 3
    assert main(["train", "--dataset", str(tmp_path / "nothing"), "--output", str(tmp_path)]) == 3


def test_image_size_mismatch_exits_3(dataset_dir, tmp_path):
    # toy preset expects 96x96 observations, the dataset has 16x16
    assert main(["train", "--dataset", dataset_dir, "--output", str(tmp_path)]) == 3


def test_config_errors_exit_2(tmp_path):
    assert main(["--set", "train.precision=float16", "grad-check", "--output", str(tmp_path)]) == 2
    assert main(["--set", "unknown.key=1", "grad-check", "--output", str(tmp_path)]) == 2


def test_grad_check_passes(tmp_path, capsys):
    assert main(["grad-check", "--seeds", "1", "--output", str(tmp_path)]) == 0
    table = pd.read_csv(tmp_path / "grad_check.csv")
    assert table["passed"].all()
    printed = capsys.readouterr().out
    assert all(op in printed for op in table["op"].unique())


def test_grad_check_failure_exits_4(monkeypatch, tmp_path):
    failing = pd.DataFrame([{"op": "relu", "seed": 0, "max_rel_error": 0.5, "tolerance": 1e-3, "passed": False}])
    monkeypatch.setattr(cli.commands, "run_grad_checks", lambda seeds: failing)
    assert main(["grad-check", "--output", str(tmp_path)]) == 4


@pytest.mark.parametrize('error, code', [
    (InvalidArgumentError, 2), (OutOfRangeError, 2), (UnsupportedVariantError, 2),
    (TrainingAbortError, 6), (ExpertLostError, 6), (OffRouteError, 6), (StalePlanError, 6),
])
def test_run_errors_map_to_exit_codes(monkeypatch, tmp_path, caplog, error, code):
    def fail(seeds):
        raise error("first line\nsecond line")
    monkeypatch.setattr(cli.commands, "run_grad_checks", fail)
    assert main(["grad-check", "--output", str(tmp_path)]) == code
    assert f"{error.__name__}: first line second line" in caplog.text


def test_unknown_variant_exits_2(dataset_dir, tmp_path):
    assert main(TINY + ["--set", "model.variant=M9", "train", "--dataset", dataset_dir,
                        "--output", str(tmp_path)]) == 2


BENCHMARK = ["--set", "benchmark.episodes=1", "--set", "benchmark.traffic=[empty]", "--set",
             "benchmark.setups=[training]", "--set", "benchmark.noise=false", "--set",
             "benchmark.min_route_length=150", "--set", "benchmark.max_route_length=250"]


def test_closed_loop_gate(tmp_path):
    assert main(BENCHMARK + ["eval-closed", "--planner", "expert-replay", "--output", str(tmp_path / "ok")]) == 0
    summary = pd.read_csv(tmp_path / "ok" / "summary.csv")
    assert summary.loc[0, "success_rate"] == 100.0
    gated = BENCHMARK + ["--set", "benchmark.min_success_rate=101"]
    assert main(gated + ["eval-closed", "--planner", "expert-replay", "--output", str(tmp_path / "gate")]) == 5


def test_takeover_needs_an_uncertainty_model(tmp_path):
    assert main(BENCHMARK + ["--set", "benchmark.takeover=true", "eval-closed", "--planner", "null",
                             "--output", str(tmp_path)]) == 2


@pytest.mark.slow
def test_collect_then_build_dataset(tmp_path):
    small = ["--set", "sim.height=16", "--set", "sim.width=16", "--set", "collect.dynamic=false",
             "--set", "collect.min_route_length=60", "--set", "collect.max_route_length=90"]
    episodes = tmp_path / "episodes"
    assert main(small + ["collect", "--episodes", "2", "--weathers", "clear-day", "--output", str(episodes)]) == 0
    summary = pd.read_csv(episodes / "collection_summary.csv")
    assert len(summary) == 2
    first = sorted(p for p in os.listdir(episodes) if os.path.isdir(episodes / p))
    assert len(first) == 2

    again = tmp_path / "again"
    assert main(small + ["collect", "--episodes", "2", "--weathers", "clear-day", "--output", str(again)]) == 0
    for folder in first:
        assert (episodes / folder / "ticks.jsonl").read_bytes() == (again / folder / "ticks.jsonl").read_bytes()

    out = tmp_path / "dataset"
    assert main(small + ["build-dataset", "--episodes", str(episodes), "--output", str(out)]) == 0
    assert json.loads((out / "run_meta.json").read_text())["records"] > 0
