# run_training.py

import math
import os
import time

import numpy as np
from tqdm import tqdm

from config import Config
from etl.transformation import iterate_minibatches, random_crop_flip
from models.checkpoint import load_checkpoint, save_checkpoint
from models.network import (
    TRAIN,
    SimulationOptions,
    backward_bptt,
    forward_unrolled,
    init_network,
    loss_and_output_grad,
    predict,
)
from models.optimizer import lr_at, parameter_norm, sgd_step
from numerics.rng import Rng
from services.base_service import evaluate
from utils.constants import OutputFile
from utils.errors import (
    ArchitectureMismatchError,
    NeuronError,
    SnnError,
    TrainingDivergedError,
)
from utils.logging_config import logger
from views.reports import append_metrics_row


def train_epoch(net, dataset, rng, epoch, config, lr):
    """One pass of shuffled minibatches; returns (mean loss, accuracy)."""
    data = config.data
    augment = data.augment and dataset.name.startswith("cifar")
    total_loss = 0.0
    correct = 0
    seen = 0
    batches = list(iterate_minibatches(len(dataset), config.train.batch_size, rng, epoch))
    progress = tqdm(
        batches,
        desc=f"epoch {epoch + 1}/{config.train.epochs}",
        disable=not Config.SHOW_PROGRESS,
        leave=False,
    )
    for ids in progress:
        images = dataset.images[ids]
        labels = dataset.labels[ids]
        if augment:
            images = random_crop_flip(
                images, ids, rng, epoch, data.crop_padding, data.horizontal_flip
            )
        try:
            potentials, tape = forward_unrolled(
                net, images, rng, mode=TRAIN, sample_ids=ids, pass_id=epoch
            )
            loss, output_grad = loss_and_output_grad(potentials, labels)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"Loss became {loss} at epoch {epoch + 1}")
            grads = backward_bptt(net, tape, output_grad)
        except NeuronError as e:
            raise TrainingDivergedError(f"Training diverged at epoch {epoch + 1}: {e}") from e
        sgd_step(
            net,
            grads,
            lr,
            momentum=config.train.momentum,
            weight_decay=config.train.weight_decay,
        )
        total_loss += loss * len(ids)
        correct += int(np.sum(predict(potentials) == labels))
        seen += len(ids)
        progress.set_postfix(loss=f"{loss:.4f}")
    return total_loss / seen, correct / seen


def _check_resumable(config, checkpoint, source):
    """The run config must reproduce the checkpoint's simulation and seed."""
    expected = SimulationOptions.from_run_config(config).to_dict()
    stored = checkpoint.net.options.to_dict()
    differences = [
        f"{key}: config {expected[key]!r}, checkpoint {stored.get(key)!r}"
        for key in sorted(expected)
        if stored.get(key) != expected[key]
    ]
    if checkpoint.seed != config.train.seed:
        differences.append(f"seed: config {config.train.seed}, checkpoint {checkpoint.seed}")
    if differences:
        raise ArchitectureMismatchError(
            f"Cannot resume from {source}; run config differs ({'; '.join(differences)})"
        )


def _start(config, spec, rng, resume):
    options = SimulationOptions.from_run_config(config)
    if resume is None:
        return init_network(spec, options, rng), 0
    checkpoint = load_checkpoint(resume, expected_spec=spec)
    _check_resumable(config, checkpoint, resume)
    if checkpoint.epoch >= config.train.epochs:
        raise SnnError(
            f"{resume} already holds epoch {checkpoint.epoch} of {config.train.epochs}"
        )
    logger.info(f"[Train] Resuming from {resume} after epoch {checkpoint.epoch}")
    return checkpoint.net, checkpoint.epoch


def train(config, train_set, test_set=None, net_spec=None, out_dir=None, resume=None):
    """
    Train a network per ``config``. With ``out_dir`` every epoch is appended
    to metrics.csv and checkpoints are written (every ``checkpoint_every``
    epochs and at the end). Returns (network, metrics rows).
    """
    config.validate()
    spec = net_spec or config.net_spec()
    if len(train_set) < 2:
        raise SnnError(f"Training set needs at least 2 samples, got {len(train_set)}")
    rng = Rng(config.train.seed)
    net, start_epoch = _start(config, spec, rng, resume)
    settings = config.train
    metrics_path = os.path.join(out_dir, OutputFile.METRICS) if out_dir else None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    logger.info(
        f"[Train] {spec.name} on {train_set.name}: {len(train_set)} samples, "
        f"T={settings.timesteps}, epochs {start_epoch + 1}..{settings.epochs}, "
        f"milestones {settings.lr_milestones}"
    )
    metrics = []
    for epoch in range(start_epoch, settings.epochs):
        started = time.time()
        lr = lr_at(epoch, settings.epochs, settings.lr, settings.lr_decay)
        try:
            train_loss, train_acc = train_epoch(net, train_set, rng, epoch, config, lr)
        except TrainingDivergedError:
            logger.error(f"[Train] Aborting at epoch {epoch + 1}", exc_info=True)
            raise
        eval_acc = evaluate(net, test_set, rng).accuracy if test_set is not None else math.nan
        row = {
            "epoch": epoch + 1,
            "lr": lr,
            "train_loss": train_loss,
            "train_acc": train_acc,
            "eval_acc": eval_acc,
            "wall_time_s": time.time() - started if settings.log_wall_time else 0.0,
        }
        metrics.append(row)
        logger.info(
            f"[Train] epoch {epoch + 1}: lr={lr:.4g} loss={train_loss:.4f} "
            f"train_acc={train_acc:.4f} eval_acc={eval_acc:.4f} "
            f"|params|={parameter_norm(net):.4g}"
        )
        if metrics_path:
            append_metrics_row(metrics_path, row)
        every = settings.checkpoint_every
        if out_dir and every and (epoch + 1) % every == 0 and epoch + 1 < settings.epochs:
            save_checkpoint(
                os.path.join(out_dir, f"epoch_{epoch + 1:04d}.ckpt"),
                net,
                epoch + 1,
                settings.seed,
                config.to_dict(),
            )

    if out_dir:
        save_checkpoint(
            os.path.join(out_dir, OutputFile.FINAL_CHECKPOINT),
            net,
            settings.epochs,
            settings.seed,
            config.to_dict(),
        )
    return net, metrics
