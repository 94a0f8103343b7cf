"""
Poisson rate coding of static images.

At every timestep each pixel draws u ~ U[0, 1) and spikes when u < intensity, so
the expected firing rate equals the pixel intensity. Draws come from the POISSON
stream keyed by (pass id, sample id, timestep); the pixel index is the position
in that stream.
"""

import numpy as np

from utils.constants import PassId, StreamLabel
from utils.errors import EncodingError

SPIKE_DTYPE = np.uint8


def check_intensities(images):
    if not np.all(np.isfinite(images)):
        raise EncodingError("Image contains non-finite intensities")
    low, high = float(np.min(images)), float(np.max(images))
    if low < 0.0 or high > 1.0:
        raise EncodingError(
            f"Pixel intensities must lie in [0, 1], got range [{low}, {high}]"
        )


def poisson_encode(images, rng, timestep, sample_ids=None, pass_id=PassId.EVAL):
    """
    Encode a batch ``images[B, ...]`` into one binary spike frame of the same
    shape (dtype uint8).
    """
    images = np.asarray(images)
    check_intensities(images)
    batch = images.shape[0]
    if sample_ids is None:
        sample_ids = np.arange(batch)
    if len(sample_ids) != batch:
        raise EncodingError(
            f"Got {len(sample_ids)} sample ids for a batch of {batch} images"
        )
    pixels = int(np.prod(images.shape[1:]))
    flat = images.reshape(batch, pixels)
    frame = np.empty((batch, pixels), dtype=SPIKE_DTYPE)
    for b in range(batch):
        draws = rng.stream(
            StreamLabel.POISSON, pass_id, int(sample_ids[b]), timestep
        ).random(pixels)
        frame[b] = draws < flat[b]
    return frame.reshape(images.shape)


def encode_train(images, rng, timesteps, sample_ids=None, pass_id=PassId.EVAL):
    """Stack ``timesteps`` frames into a [T, B, ...] spike train."""
    return np.stack(
        [
            poisson_encode(images, rng, t, sample_ids=sample_ids, pass_id=pass_id)
            for t in range(timesteps)
        ]
    )
