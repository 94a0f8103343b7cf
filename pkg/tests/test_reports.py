"""
Tests for views.reports
"""

import json
import math
import os

from services.early_exit import EarlyExitPolicy
from services.energy import EnergyReport, LayerEnergy
from utils.constants import OutputFile
from views.reports import (
    METRICS_COLUMNS,
    append_metrics_row,
    format_energy_summary,
    read_metrics,
    write_exit_summary,
    write_rows_csv,
    write_run_manifest,
)


def _row(epoch):
    return {
        "epoch": epoch,
        "lr": 0.3,
        "train_loss": 1.0 / epoch,
        "train_acc": 0.5,
        "eval_acc": math.nan,
        "wall_time_s": 0.0,
    }


def test_metrics_header_written_once(tmp_path):
    path = str(tmp_path / "metrics.csv")
    for epoch in (1, 2, 3):
        append_metrics_row(path, _row(epoch))
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert len(lines) == 4
    assert [row["epoch"] for row in read_metrics(path)] == [1, 2, 3]


def test_manifest_contents(tmp_path):
    path = write_run_manifest(str(tmp_path / "out"), "noise", {"train": {"seed": 3}}, 3, sigmas=[0.1])
    with open(path) as f:
        manifest = json.load(f)
    assert manifest["command"] == "noise"
    assert manifest["sigmas"] == [0.1]
    assert manifest["build_id"]
    assert manifest["started_at"]
    assert os.path.basename(path) == OutputFile.MANIFEST == "manifest.json"


def test_empty_rows_still_write_a_header(tmp_path):
    path = tmp_path / "empty.csv"
    write_rows_csv(str(path), [], ["tau", "exit_time", "accuracy"])
    assert path.read_text().strip() == "tau,exit_time,accuracy"


def test_energy_summary_with_silent_network():
    report = EnergyReport(
        layers=[LayerEnergy("fc1", 100, "input", 0.0, 0.0)],
        e_ann=460.0,
        e_snn=0.0,
        timesteps=5,
        neuromorphic=3.0,
    )
    text = format_energy_summary(report)
    assert "ratio_ANN_over_SNN = inf" in text
    assert "fc1 100 input 0 0" in text
    assert "neuromorphic_energy = 3" in text


def test_exit_summary(tmp_path):
    path = tmp_path / "exit.txt"
    write_exit_summary(str(path), EarlyExitPolicy(0.1, 3, 25), 0.91, 0.92)
    text = path.read_text()
    assert "exit_time = 3" in text
    assert "full_accuracy = 0.920000" in text
