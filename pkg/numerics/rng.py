"""
Counter-based seeded randomness.

Every consumer asks the master ``Rng`` for a generator keyed by a stream label
(weight init, Poisson encoding, shuffling, noise, augmentation) and up to three
integer ids. The generator is Philox4x64 with key ``(seed, label)`` and counter
``(0, id2, id1, id0)``: draws advance the low counter word only, so streams with
different ids never overlap and the value stream depends only on the key, not on
the platform or on the order in which streams are requested.
"""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Rng:
    seed: int

    def stream(self, label, *ids):
        if len(ids) > 3:
            raise ValueError(f"At most three stream ids are supported, got {len(ids)}")
        words = [0, 0, 0, 0]
        for position, value in enumerate(ids):
            if value < 0:
                raise ValueError(f"Stream ids must be non-negative, got {value}")
            words[3 - position] = int(value) & _MASK64
        key = np.array([self.seed & _MASK64, int(label) & _MASK64], dtype=np.uint64)
        counter = np.array(words, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))
