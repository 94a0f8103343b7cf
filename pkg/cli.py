"""
Command-line entry point.

    python cli.py train --config CFG --data DIR --out DIR [--seed N] [--resume CKPT]
    python cli.py eval --checkpoint CKPT --data DIR [--early-exit-tau R] [--timesteps N] [--out DIR]
    python cli.py energy --checkpoint CKPT --data DIR --out DIR
    python cli.py noise --checkpoint CKPT --data DIR --out DIR --sigmas 0,0.2,0.4
    python cli.py attack --checkpoint CKPT --data DIR --out DIR --eps 0,0.05
    python cli.py exit-sweep --checkpoint CKPT --data DIR --out DIR --taus 0.05,0.1

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import functools
import math
import os

import click

from etl.extraction import load_dataset
from models.checkpoint import load_checkpoint
from numerics.rng import Rng
from run_training import train
from services.base_service import evaluate
from services.early_exit import (
    compute_exit_time,
    gamma_histograms,
    gamma_profile,
    gamma_profile_rows,
    sweep_exit_thresholds,
)
from services.energy import energy_report
from services.robustness import fgsm_eval, gaussian_noise_eval
from services.spike_stats import spike_rate
from utils.constants import OutputFile
from utils.errors import CheckpointError, SnnError
from utils.logging_config import logger
from utils.run_config import RunConfig, parse_config
from views.reports import (
    write_energy_summary,
    write_exit_summary,
    write_rows_csv,
    write_run_manifest,
    write_spike_csv,
)


def _reports_errors(command):
    """Turn engine and I/O failures into exit code 1 with a readable cause."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (SnnError, OSError) as e:
            logger.error(f"[CLI] {command.__name__} failed: {e}", exc_info=True)
            raise click.ClickException(str(e))

    return wrapper


def _levels(ctx, param, value):
    try:
        levels = [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")
    if not levels:
        raise click.BadParameter("at least one value is required")
    if not all(math.isfinite(level) for level in levels):
        raise click.BadParameter(f"values must be finite, got {value!r}")
    return levels


def _load_trained(checkpoint_path, data_dir, out_dir, command, **extra):
    """Load the checkpoint, record the run manifest, then load the test split."""
    checkpoint = load_checkpoint(checkpoint_path)
    if not checkpoint.config:
        raise CheckpointError(f"{checkpoint_path} carries no run configuration")
    config = RunConfig.from_dict(checkpoint.config)
    write_run_manifest(out_dir, command, config.to_dict(), checkpoint.seed, **extra)
    dataset = load_dataset(config.data.dataset, data_dir, "test").subset(config.data.test_limit)
    return checkpoint, config, dataset, Rng(checkpoint.seed)


def _timesteps_within(net, timesteps):
    if timesteps is None:
        return net.timesteps
    if timesteps > net.timesteps:
        raise click.BadParameter(
            f"{timesteps} exceeds the trained T={net.timesteps}", param_hint="--timesteps"
        )
    return timesteps


@click.group()
def cli():
    """BNTT spiking network training and analysis"""


@cli.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override train.seed")
@click.option("--resume", type=click.Path(dir_okay=False), default=None)
@_reports_errors
def train_command(config_path, data_dir, out_dir, seed, resume):
    """Train a network and write metrics and checkpoints."""
    config, _ = parse_config(config_path)
    if seed is not None:
        config = config.with_seed(seed)
    write_run_manifest(
        out_dir, "train", config.to_dict(), config.train.seed, data=os.path.abspath(data_dir)
    )

    data = config.data
    train_set = load_dataset(data.dataset, data_dir, "train").subset(data.train_limit)
    test_set = load_dataset(data.dataset, data_dir, "test").subset(data.test_limit)
    _, metrics = train(config, train_set, test_set, out_dir=out_dir, resume=resume)
    if metrics:
        last = metrics[-1]
        click.echo(
            f"epoch={last['epoch']} train_acc={last['train_acc']:.4f} "
            f"eval_acc={last['eval_acc']:.4f}"
        )
    click.echo(f"Artifacts written to {out_dir}")


@cli.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--early-exit-tau", "tau", type=float, default=None)
@click.option("--timesteps", type=click.IntRange(min=1), default=None)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Defaults to an eval/ directory next to the checkpoint",
)
@_reports_errors
def eval_command(checkpoint_path, data_dir, tau, timesteps, out_dir):
    """Evaluate a checkpoint, optionally stopping at the early-exit timestep."""
    if out_dir is None:
        out_dir = os.path.join(os.path.dirname(os.path.abspath(checkpoint_path)), "eval")
    checkpoint, config, dataset, rng = _load_trained(
        checkpoint_path, data_dir, out_dir, "eval", tau=tau, timesteps=timesteps
    )
    net = checkpoint.net
    steps = _timesteps_within(net, timesteps)
    policy = None
    if tau is not None:
        policy = compute_exit_time(net, tau, config.analysis.exit_rule)
        steps = min(steps, policy.exit_time)

    result = evaluate(net, dataset, rng, timesteps=steps)
    line = f"accuracy={result.accuracy:.4f} timesteps={steps}"
    if policy is not None:
        line += f" T_exit={policy.exit_time}"
    click.echo(line)

    write_spike_csv(os.path.join(out_dir, OutputFile.SPIKES), spike_rate(net.spec, result))
    if policy is not None:
        full = evaluate(net, dataset, rng).accuracy if steps < net.timesteps else None
        write_exit_summary(os.path.join(out_dir, OutputFile.EXIT), policy, result.accuracy, full)
        write_rows_csv(
            os.path.join(out_dir, OutputFile.GAMMA),
            gamma_profile_rows(gamma_profile(net)),
            ["layer", "timestep", "mean_abs_gamma"],
        )
        write_rows_csv(
            os.path.join(out_dir, OutputFile.GAMMA_HIST),
            gamma_histograms(net),
            ["layer", "timestep", "bin", "bin_low", "bin_high", "count"],
        )


@cli.command("energy")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--timesteps", type=click.IntRange(min=1), default=None)
@click.option(
    "--reference-energy",
    type=float,
    default=None,
    help="Neuromorphic energy of a reference run to normalize against",
)
@_reports_errors
def energy_command(checkpoint_path, data_dir, out_dir, timesteps, reference_energy):
    """Measure spike rates and report CMOS and neuromorphic energy."""
    checkpoint, _, dataset, rng = _load_trained(
        checkpoint_path, data_dir, out_dir, "energy", timesteps=timesteps
    )
    net = checkpoint.net
    result = evaluate(net, dataset, rng, timesteps=_timesteps_within(net, timesteps))
    stats = spike_rate(net.spec, result)
    report = energy_report(net.spec, stats, reference_neuromorphic=reference_energy)
    write_spike_csv(os.path.join(out_dir, OutputFile.SPIKES), stats)
    write_energy_summary(os.path.join(out_dir, OutputFile.ENERGY), report)
    click.echo(
        f"E_ANN={report.e_ann:.6g} pJ E_SNN={report.e_snn:.6g} pJ "
        f"ratio={report.ratio:.4g} accuracy={result.accuracy:.4f}"
    )


@cli.command("noise")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--sigmas", default="0,0.2,0.4,0.6,0.8,1.0", callback=_levels)
@_reports_errors
def noise_command(checkpoint_path, data_dir, out_dir, sigmas):
    """Accuracy under additive Gaussian noise."""
    checkpoint, _, dataset, rng = _load_trained(
        checkpoint_path, data_dir, out_dir, "noise", sigmas=sigmas
    )
    rows = gaussian_noise_eval(checkpoint.net, dataset, sigmas, rng)
    write_rows_csv(os.path.join(out_dir, OutputFile.NOISE), rows, ["sigma", "accuracy"])
    for row in rows:
        click.echo(f"sigma={row['sigma']} accuracy={row['accuracy']:.4f}")


@cli.command("attack")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--eps", "epsilons", default="0,0.01,0.02,0.05", callback=_levels)
@_reports_errors
def attack_command(checkpoint_path, data_dir, out_dir, epsilons):
    """Accuracy under FGSM adversarial inputs."""
    checkpoint, _, dataset, rng = _load_trained(
        checkpoint_path, data_dir, out_dir, "attack", eps=epsilons
    )
    rows = fgsm_eval(checkpoint.net, dataset, epsilons, rng)
    write_rows_csv(os.path.join(out_dir, OutputFile.FGSM), rows, ["eps", "accuracy"])
    for row in rows:
        click.echo(f"eps={row['eps']} accuracy={row['accuracy']:.4f}")


@cli.command("exit-sweep")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--taus", default="0.02,0.05,0.1,0.2,0.5", callback=_levels)
@_reports_errors
def exit_sweep_command(checkpoint_path, data_dir, out_dir, taus):
    """Accuracy and exit timestep for a range of gamma thresholds."""
    checkpoint, config, dataset, rng = _load_trained(
        checkpoint_path, data_dir, out_dir, "exit-sweep", taus=taus
    )
    rows = sweep_exit_thresholds(
        checkpoint.net, dataset, rng, taus, rule=config.analysis.exit_rule
    )
    write_rows_csv(
        os.path.join(out_dir, OutputFile.EXIT_SWEEP), rows, ["tau", "exit_time", "accuracy"]
    )
    for row in rows:
        click.echo(
            f"tau={row['tau']} T_exit={row['exit_time']} accuracy={row['accuracy']:.4f}"
        )


if __name__ == "__main__":
    cli()
