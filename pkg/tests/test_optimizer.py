"""
Tests for models.optimizer
"""

import numpy as np
import pytest

from conftest import two_layer_spec
from models.network import Gradients, SimulationOptions, init_network
from models.optimizer import lr_at, lr_milestones, parameter_norm, sgd_step
from numerics.rng import Rng
from utils.errors import SnnError


def _net():
    return init_network(two_layer_spec(), SimulationOptions(timesteps=2, precision="float64"), Rng(0))


def _grads(net, fill):
    weights = {l.spec.name: np.full(l.weight.shape, fill) for l in net.layers}
    gammas = {l.spec.name: np.full(l.norm.gamma.shape, fill) for l in net.layers}
    return Gradients(weights, gammas)


class TestSchedule:
    def test_milestones_for_120_epochs(self):
        assert lr_milestones(120) == (60, 84, 108)

    @pytest.mark.parametrize(
        "epoch,expected", [(0, 0.3), (59, 0.3), (60, 0.03), (83, 0.03), (84, 0.003), (108, 0.0003), (119, 0.0003)]
    )
    def test_lr_decays_by_ten(self, epoch, expected):
        assert lr_at(epoch, 120, 0.3, 0.1) == pytest.approx(expected)


class TestSgdStep:
    def test_zero_gradient_only_decays_weights(self):
        net = _net()
        before = {k: v.copy() for k, v in net.parameters().items()}
        sgd_step(net, _grads(net, 0.0), lr=0.1, momentum=0.9, weight_decay=5e-4)
        for name, param in net.parameters().items():
            if name.endswith(".weight"):
                np.testing.assert_allclose(param, before[name] * (1 - 0.1 * 5e-4), rtol=1e-12)
            else:
                np.testing.assert_array_equal(param, before[name])

    def test_first_step_is_plain_sgd(self):
        net = _net()
        before = {k: v.copy() for k, v in net.parameters().items()}
        sgd_step(net, _grads(net, 0.5), lr=0.2, weight_decay=0.0)
        for name, param in net.parameters().items():
            np.testing.assert_allclose(param, before[name] - 0.2 * 0.5, rtol=1e-12)

    def test_momentum_accumulates(self):
        net = _net()
        grads = _grads(net, 1.0)
        sgd_step(net, grads, lr=0.1, momentum=0.9, weight_decay=0.0)
        middle = {k: v.copy() for k, v in net.parameters().items()}
        sgd_step(net, grads, lr=0.1, momentum=0.9, weight_decay=0.0)
        for name, param in net.parameters().items():
            np.testing.assert_allclose(middle[name] - param, 0.1 * 1.9, rtol=1e-12)

    def test_missing_gradient_is_rejected(self):
        net = _net()
        grads = _grads(net, 0.0)
        del grads.weights["fc1"]
        with pytest.raises(SnnError):
            sgd_step(net, grads, lr=0.1)


def test_parameter_norm_positive():
    assert parameter_norm(_net()) > 0
