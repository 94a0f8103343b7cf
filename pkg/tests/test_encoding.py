"""
Tests for etl.encoding
"""

import numpy as np
import pytest

from etl.encoding import SPIKE_DTYPE, encode_train, poisson_encode
from numerics.rng import Rng
from utils.constants import PassId
from utils.errors import EncodingError


def test_frame_is_binary_with_input_shape():
    images = np.full((3, 1, 4, 4), 0.5, dtype=np.float32)
    frame = poisson_encode(images, Rng(0), 0)
    assert frame.shape == images.shape
    assert frame.dtype == SPIKE_DTYPE
    assert set(np.unique(frame)) <= {0, 1}


def test_extreme_intensities_are_deterministic():
    images = np.zeros((2, 1, 3, 3))
    images[1] = 1.0
    train = encode_train(images, Rng(3), 20)
    assert train[:, 0].sum() == 0
    assert train[:, 1].min() == 1


@pytest.mark.parametrize("intensity", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_rate_within_binomial_bounds(intensity):
    timesteps = 10_000
    images = np.full((1, 1, 1, 1), intensity)
    train = encode_train(images, Rng(11), timesteps)
    rate = train.mean()
    bound = 3 * np.sqrt(intensity * (1 - intensity) / timesteps)
    assert abs(rate - intensity) <= bound


def test_frames_keyed_by_sample_not_batch_position():
    gen = np.random.default_rng(0)
    images = gen.random((4, 1, 5, 5))
    rng = Rng(2)
    full = poisson_encode(images, rng, 3, sample_ids=np.arange(10, 14))
    single = poisson_encode(images[2:3], rng, 3, sample_ids=np.array([12]))
    np.testing.assert_array_equal(full[2], single[0])


def test_pass_id_changes_frames():
    images = np.full((2, 1, 8, 8), 0.5)
    rng = Rng(4)
    train_pass = poisson_encode(images, rng, 0, pass_id=0)
    eval_pass = poisson_encode(images, rng, 0, pass_id=PassId.EVAL)
    assert not np.array_equal(train_pass, eval_pass)
    np.testing.assert_array_equal(eval_pass, poisson_encode(images, rng, 0))


@pytest.mark.parametrize("bad", [1.5, -0.1, np.nan, np.inf])
def test_rejects_out_of_range_intensity(bad):
    images = np.zeros((1, 1, 2, 2))
    images[0, 0, 1, 1] = bad
    with pytest.raises(EncodingError):
        poisson_encode(images, Rng(0), 0)


def test_rejects_mismatched_sample_ids():
    with pytest.raises(EncodingError):
        poisson_encode(np.zeros((2, 1, 2, 2)), Rng(0), 0, sample_ids=[1])
