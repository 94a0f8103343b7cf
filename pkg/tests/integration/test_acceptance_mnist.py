"""
End-to-end acceptance run on real MNIST with configs/mnist_small_conv.cfg.

Slow: trains the small conv network for the configured epochs. Runs only when
SNN_MNIST_DIR points at a directory holding the MNIST IDX files.
"""

import os

import numpy as np
import pytest

from etl.extraction import load_dataset
from numerics.rng import Rng
from run_training import train
from services.base_service import evaluate
from services.early_exit import gamma_profile, sweep_exit_thresholds
from services.energy import energy_report
from services.robustness import fgsm_eval, gaussian_noise_eval
from services.spike_stats import spike_rate
from utils.run_config import parse_config

MNIST_DIR = os.getenv("SNN_MNIST_DIR")
CONFIG = os.path.join(os.path.dirname(__file__), "..", "..", "configs", "mnist_small_conv.cfg")
ATTACK_SAMPLES = 1000

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not MNIST_DIR, reason="SNN_MNIST_DIR is not set"),
]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    config, _ = parse_config(CONFIG)
    train_set = load_dataset("mnist", MNIST_DIR, "train")
    test_set = load_dataset("mnist", MNIST_DIR, "test")
    net, _ = train(config, train_set, out_dir=str(tmp_path_factory.mktemp("mnist")))
    clean = evaluate(net, test_set, Rng(config.train.seed))
    return net, test_set, config, clean


def test_reaches_target_accuracy(run):
    _, _, _, clean = run
    assert clean.accuracy >= 0.95


def test_early_exit_keeps_accuracy(run):
    net, test_set, config, clean = run
    # one tau per distinct exit point, taken just above each timestep's peak mean |gamma|
    peaks = np.vstack(list(gamma_profile(net).values())).max(axis=0)
    taus = sorted({float(np.nextafter(peak, np.inf)) for peak in peaks[1:]})
    rows = sweep_exit_thresholds(
        net, test_set, Rng(config.train.seed), taus, rule=config.analysis.exit_rule
    )
    early = [row for row in rows if row["exit_time"] < net.timesteps]
    assert early, f"no threshold exits before T={net.timesteps}: {rows}"
    best = max(row["accuracy"] for row in early)
    assert best >= clean.accuracy - 0.015


def test_snn_spends_less_energy_than_ann(run):
    net, _, _, clean = run
    report = energy_report(net.spec, spike_rate(net.spec, clean))
    assert report.ratio > 1.0


def test_perturbations_do_not_raise_accuracy(run):
    net, test_set, config, _ = run
    subset = test_set.subset(ATTACK_SAMPLES)
    noise = gaussian_noise_eval(net, subset, [0.0, 1.0], Rng(config.train.seed))
    assert noise[1]["accuracy"] <= noise[0]["accuracy"]
    attack = fgsm_eval(net, subset, [0.0, 0.05], Rng(config.train.seed))
    assert attack[1]["accuracy"] <= attack[0]["accuracy"]
