"""
Shared fixtures: finite-difference gradient checking and tiny networks.
"""

import numpy as np
import pytest

from models.layers import LayerKind, LayerSpec, NetSpec, NormKind
from models.network import SimulationOptions, init_network
from numerics.rng import Rng


def central_difference(loss_fn, array, eps=1e-6):
    """Numerical gradient of ``loss_fn()`` with respect to ``array`` (perturbed in place)."""
    grad = np.zeros(array.shape, dtype=np.float64)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + eps
        plus = loss_fn()
        array[index] = original - eps
        minus = loss_fn()
        array[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def two_layer_spec(inputs=4, hidden=5, classes=3, norm=NormKind.BNTT, side=2):
    """Linear hidden layer + linear output on a [1, side, inputs/side] image."""
    return NetSpec(
        name="tiny",
        input_shape=(1, side, inputs // side),
        layers=(
            LayerSpec(LayerKind.LINEAR, "fc1", inputs, hidden, norm=norm),
            LayerSpec(LayerKind.LINEAR, "fc2", hidden, classes, norm=norm, is_output=True),
        ),
        num_classes=classes,
    )


def conv_spec(norm=NormKind.BNTT):
    """conv -> avgpool -> linear output on 1x4x4 images."""
    return NetSpec(
        name="tiny_conv",
        input_shape=(1, 4, 4),
        layers=(
            LayerSpec(LayerKind.CONV, "conv1", 1, 2, norm=norm),
            LayerSpec(LayerKind.AVGPOOL, "pool1", norm=NormKind.NONE),
            LayerSpec(LayerKind.LINEAR, "fc1", 8, 3, norm=norm, is_output=True),
        ),
        num_classes=3,
    )


@pytest.fixture
def numeric_grad():
    return central_difference


@pytest.fixture
def rel_error():
    return relative_error


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def gradcheck_options():
    return SimulationOptions(
        timesteps=3,
        spike_fn="smooth",
        detach_reset=False,
        precision="float64",
    )


@pytest.fixture
def tiny_net(rng):
    return init_network(two_layer_spec(), SimulationOptions(timesteps=4), rng)
