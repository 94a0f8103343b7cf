"""
Integration tests for the training loop: determinism, learning on separable
data, the learning-rate schedule and resuming from a checkpoint.
"""

import math
import os
from dataclasses import replace

import numpy as np
import pytest

from etl.extraction import Dataset, load_dataset
from models.checkpoint import load_checkpoint
from models.layers import LayerKind, LayerSpec, NetSpec
from models.network import forward_unrolled, predict
from numerics.rng import Rng
from run_training import train
from scripts.make_toy_dataset import write_toy_mnist
from utils.errors import ArchitectureMismatchError, SnnError
from utils.run_config import DataConfig, RunConfig, TrainConfig, parse_config
from views.reports import read_metrics

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "..", "configs")


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    return str(write_toy_mnist(tmp_path_factory.mktemp("toy"), train=10, test=10))


@pytest.fixture(scope="module")
def toy_config():
    config, _ = parse_config(os.path.join(CONFIG_DIR, "toy_mnist_mlp.cfg"))
    return config


def _separable(count=16, side=4, seed=0):
    """Class 0 lights the top half, class 1 the bottom half."""
    gen = np.random.default_rng(seed)
    labels = np.arange(count) % 2
    images = gen.uniform(0.0, 0.1, size=(count, 1, side, side))
    for index, label in enumerate(labels):
        rows = slice(0, side // 2) if label == 0 else slice(side // 2, side)
        images[index, 0, rows] = gen.uniform(0.8, 1.0, size=(side // 2, side))
    return Dataset("separable", "train", images.astype(np.float32), labels, 2)


def _small_mlp():
    return NetSpec(
        "small_mlp",
        (1, 4, 4),
        (
            LayerSpec(LayerKind.LINEAR, "fc1", 16, 32),
            LayerSpec(LayerKind.LINEAR, "fc2", 32, 2, is_output=True),
        ),
        2,
    )


def test_same_seed_gives_identical_metrics(toy_dir, toy_config, tmp_path):
    train_set = load_dataset("mnist", toy_dir, "train")
    test_set = load_dataset("mnist", toy_dir, "test")
    for run in ("a", "b"):
        train(toy_config, train_set, test_set, out_dir=str(tmp_path / run))
    first = (tmp_path / "a" / "metrics.csv").read_text()
    second = (tmp_path / "b" / "metrics.csv").read_text()
    assert first == second
    assert len(read_metrics(str(tmp_path / "a" / "metrics.csv"))) == toy_config.train.epochs


def test_different_seed_changes_the_run(toy_dir, toy_config):
    train_set = load_dataset("mnist", toy_dir, "train")
    _, first = train(toy_config, train_set)
    _, second = train(toy_config.with_seed(1), train_set)
    assert first[0]["train_loss"] != second[0]["train_loss"]
    assert math.isnan(first[0]["eval_acc"])


def test_learns_separable_data():
    dataset = _separable()
    config = RunConfig(
        train=TrainConfig(
            timesteps=8, batch_size=16, epochs=20, lr=0.1, log_wall_time=False
        ),
        data=DataConfig(dataset="mnist", augment=False),
    )
    net, metrics = train(config, dataset, net_spec=_small_mlp())
    assert max(row["train_acc"] for row in metrics) == 1.0
    assert metrics[-1]["train_loss"] < metrics[0]["train_loss"]
    potentials, _ = forward_unrolled(net, dataset.images, Rng(0))
    assert np.mean(predict(potentials) == dataset.labels) >= 0.9


def test_learning_rate_schedule():
    config = RunConfig(
        train=TrainConfig(timesteps=2, batch_size=8, epochs=10, lr=0.2, log_wall_time=False),
        data=DataConfig(dataset="mnist", augment=False),
    )
    _, metrics = train(config, _separable(count=8), net_spec=_small_mlp())
    lrs = [row["lr"] for row in metrics]
    assert lrs[:5] == [0.2] * 5
    assert lrs[5:7] == pytest.approx([0.02] * 2)
    assert lrs[7:9] == pytest.approx([0.002] * 2)
    assert lrs[9] == pytest.approx(0.0002)


def test_resume_continues_the_same_run(toy_dir, toy_config, tmp_path):
    train_set = load_dataset("mnist", toy_dir, "train")
    _, full = train(toy_config, train_set, out_dir=str(tmp_path / "full"))
    checkpoint = tmp_path / "full" / "epoch_0001.ckpt"
    assert checkpoint.exists()
    _, resumed = train(
        toy_config, train_set, out_dir=str(tmp_path / "resumed"), resume=str(checkpoint)
    )
    assert [row["epoch"] for row in resumed] == [2]
    assert resumed[0]["train_loss"] == pytest.approx(full[1]["train_loss"], rel=1e-6)
    assert resumed[0]["train_acc"] == full[1]["train_acc"]


@pytest.mark.parametrize(
    "section,changes",
    [
        ("train", {"timesteps": 10}),
        ("train", {"precision": "float64"}),
        ("train", {"seed": 1}),
        ("neuron", {"threshold": 0.5}),
        ("neuron", {"leak": 0.9}),
        ("bntt", {"epsilon": 1e-3}),
        ("bntt", {"ema_rho": 0.2}),
    ],
)
def test_resume_rejects_a_different_run_config(toy_dir, toy_config, tmp_path, section, changes):
    train_set = load_dataset("mnist", toy_dir, "train")
    train(toy_config, train_set, out_dir=str(tmp_path / "first"))
    changed = replace(toy_config, **{section: replace(getattr(toy_config, section), **changes)})
    out_dir = tmp_path / "second"
    with pytest.raises(ArchitectureMismatchError) as info:
        train(
            changed,
            train_set,
            out_dir=str(out_dir),
            resume=str(tmp_path / "first" / "epoch_0001.ckpt"),
        )
    assert next(iter(changes)) in str(info.value)
    assert not (out_dir / "final.ckpt").exists()


def test_resumed_final_checkpoint_is_consistent(toy_dir, toy_config, tmp_path):
    train_set = load_dataset("mnist", toy_dir, "train")
    train(toy_config, train_set, out_dir=str(tmp_path / "first"))
    train(
        toy_config,
        train_set,
        out_dir=str(tmp_path / "second"),
        resume=str(tmp_path / "first" / "epoch_0001.ckpt"),
    )
    final = load_checkpoint(str(tmp_path / "second" / "final.ckpt"))
    stored = RunConfig.from_dict(final.config)
    assert final.net.timesteps == stored.train.timesteps == toy_config.train.timesteps
    assert final.net.options.precision == stored.train.precision
    assert final.seed == stored.train.seed


def test_resume_past_the_last_epoch_is_rejected(toy_dir, toy_config, tmp_path):
    train_set = load_dataset("mnist", toy_dir, "train")
    train(toy_config, train_set, out_dir=str(tmp_path / "first"))
    with pytest.raises(SnnError):
        train(toy_config, train_set, resume=str(tmp_path / "first" / "final.ckpt"))
