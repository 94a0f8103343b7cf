"""
Tests for services.spike_stats
"""

import numpy as np
import pytest

from conftest import conv_spec, two_layer_spec
from models.network import TRAIN, SimulationOptions, forward_unrolled, init_network
from numerics.rng import Rng
from services.spike_stats import SpikeStats, spike_rate
from utils.errors import ArchitectureMismatchError


def test_hand_computed_rate():
    stats = SpikeStats(["input", "fc1"], np.array([4.0, 10.0]), np.array([[0, 0], [10, 15.0]]), 1)
    assert stats.rate("fc1") == pytest.approx(2.5)
    assert stats.rate("input") == 0.0


def test_zero_spike_run():
    stats = SpikeStats(["input", "fc1"], np.array([4.0, 10.0]), np.zeros((2, 3)), 5)
    assert np.all(stats.rates == 0)
    assert stats.hidden_spikes_per_sample() == 0.0


def test_unknown_layer():
    stats = SpikeStats(["input"], np.array([4.0]), np.zeros((1, 2)), 1)
    with pytest.raises(ArchitectureMismatchError):
        stats.rate("fc9")


@pytest.mark.parametrize("spec_factory,shape", [(two_layer_spec, (1, 2, 2)), (conv_spec, (1, 4, 4))])
def test_counts_match_rescan_of_frames(spec_factory, shape):
    rng = Rng(3)
    spec = spec_factory()
    net = init_network(spec, SimulationOptions(timesteps=5), rng)
    images = np.random.default_rng(0).uniform(size=(6,) + shape)
    _, tape = forward_unrolled(net, images, rng, mode=TRAIN, pass_id=0)
    stats = spike_rate(spec, tape)

    spiking = [i for i, layer in enumerate(spec.layers) if layer.spiking]
    expected = [[int(step[0].input.sum()) for step in tape.steps]]
    expected += [[int(step[i].output.sum()) for step in tape.steps] for i in spiking]
    np.testing.assert_array_equal(stats.per_timestep, expected)
    assert stats.layer_names[0] == "input"
    assert stats.num_samples == 6
    rescanned = sum(int(step[spiking[0]].output.sum()) for step in tape.steps)
    neurons = int(np.prod(spec.resolve_shapes()[spiking[0]][1]))
    assert stats.rates[1] == pytest.approx(rescanned / (neurons * 6))


def test_to_rows_has_one_row_per_layer_and_timestep():
    stats = SpikeStats(["input", "fc1"], np.array([4.0, 10.0]), np.ones((2, 3)), 1)
    rows = stats.to_rows()
    assert len(rows) == 6
    assert rows[0] == {"layer": "input", "timestep": 1, "spikes": 1.0, "neurons": 4, "rate": 0.75}
