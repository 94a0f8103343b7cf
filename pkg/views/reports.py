"""
Report writers for everything a run leaves under --out: CSV tables via polars,
plain-text energy and exit summaries, and the run manifest.
"""

import json
import math
import os
import subprocess
from datetime import datetime, timezone

import polars as pl

from utils.constants import OutputFile
from utils.logging_config import logger

METRICS_COLUMNS = ["epoch", "lr", "train_loss", "train_acc", "eval_acc", "wall_time_s"]


def build_id():
    """git-describe style id of the working tree, or "unknown" outside git."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else "unknown"


def write_run_manifest(out_dir, command, config, seed, **extra):
    """Write manifest.json into ``out_dir`` before any computation starts."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "build_id": build_id(),
        "out_dir": os.path.abspath(out_dir),
        "started_at": datetime.now(timezone.utc).isoformat(),
    }
    manifest.update(extra)
    path = os.path.join(out_dir, OutputFile.MANIFEST)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info(f"[Reports] Wrote run manifest {path}")
    return path


def _frame(rows, columns):
    if not rows:
        return pl.DataFrame({name: [] for name in columns})
    return pl.DataFrame(rows).select(columns)


def write_rows_csv(path, rows, columns):
    _frame(rows, columns).write_csv(path)
    logger.info(f"[Reports] Wrote {len(rows)} rows to {path}")
    return path


def append_metrics_row(path, row):
    """Append one epoch to metrics.csv, writing the header on first use."""
    text = _frame([row], METRICS_COLUMNS).write_csv()
    if os.path.exists(path) and os.path.getsize(path) > 0:
        text = text.split("\n", 1)[1]
    with open(path, "a", encoding="utf-8") as f:
        f.write(text)
    return path


def read_metrics(path):
    return pl.read_csv(path).to_dicts()


def write_spike_csv(path, stats):
    return write_rows_csv(
        path, stats.to_rows(), ["layer", "timestep", "spikes", "neurons", "rate"]
    )


def _fmt(value):
    return "inf" if math.isinf(value) else f"{value:.6g}"


def format_energy_summary(report):
    lines = ["# per-layer breakdown", "layer flops_ann input input_rate flops_snn"]
    for layer in report.layers:
        lines.append(
            f"{layer.name} {layer.flops_ann} {layer.input_layer} "
            f"{_fmt(layer.input_rate)} {_fmt(layer.flops_snn)}"
        )
    lines += [
        "",
        "# totals",
        f"E_ANN_pJ = {_fmt(report.e_ann)}",
        f"E_SNN_pJ = {_fmt(report.e_snn)}",
        f"ratio_ANN_over_SNN = {_fmt(report.ratio)}",
        f"spikes_per_sample = {_fmt(report.spikes_per_sample)}",
        f"timesteps = {report.timesteps}",
        f"neuromorphic_energy = {_fmt(report.neuromorphic)}",
        f"neuromorphic_normalized = {_fmt(report.neuromorphic_normalized)}",
    ]
    return "\n".join(lines) + "\n"


def write_energy_summary(path, report):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_energy_summary(report))
    logger.info(f"[Reports] Wrote energy summary {path}")
    return path


def write_exit_summary(path, policy, accuracy, full_accuracy=None):
    lines = [
        f"tau = {policy.tau}",
        f"rule = {policy.rule}",
        f"exit_time = {policy.exit_time}",
        f"timesteps = {policy.timesteps}",
        f"accuracy = {accuracy:.6f}",
    ]
    if full_accuracy is not None:
        lines.append(f"full_accuracy = {full_accuracy:.6f}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return path
