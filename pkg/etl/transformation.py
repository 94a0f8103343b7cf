"""
Per-epoch data transformation: seeded shuffling into minibatches and the
random crop / horizontal flip augmentation applied before encoding.
"""

import numpy as np

from utils.constants import StreamLabel


def iterate_minibatches(num_samples, batch_size, rng=None, epoch=0, min_size=2):
    """
    Yield index arrays covering ``num_samples``. Shuffled under the SHUFFLE
    stream of ``epoch`` when ``rng`` is given. A trailing batch smaller than
    ``min_size`` is dropped since batch statistics need at least two samples.
    """
    order = np.arange(num_samples)
    if rng is not None:
        rng.stream(StreamLabel.SHUFFLE, epoch).shuffle(order)
    for start in range(0, num_samples, batch_size):
        batch = order[start : start + batch_size]
        if len(batch) < min_size:
            break
        yield batch


def random_crop_flip(images, sample_ids, rng, epoch, padding=4, flip=True):
    """
    Zero-pad by ``padding`` and crop back to the original size at a random
    offset, then mirror horizontally with probability 1/2. Each sample draws
    from its own (epoch, sample id) stream, so results do not depend on batching.
    """
    if padding <= 0 and not flip:
        return images
    batch, _, height, width = images.shape
    padded = np.pad(
        images, ((0, 0), (0, 0), (padding, padding), (padding, padding))
    )
    out = np.empty_like(images)
    for b in range(batch):
        gen = rng.stream(StreamLabel.AUGMENT, epoch, int(sample_ids[b]))
        dy, dx = gen.integers(0, 2 * padding + 1, size=2) if padding > 0 else (0, 0)
        crop = padded[b, :, dy : dy + height, dx : dx + width]
        if flip and gen.random() < 0.5:
            crop = crop[:, :, ::-1]
        out[b] = crop
    return out
