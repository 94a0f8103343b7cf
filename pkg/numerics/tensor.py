"""
Dense real tensors are plain numpy arrays in B, C, H, W row-major order.
This module fixes the precision policy and the shared validation helpers.
"""

from enum import Enum

import numpy as np

from utils.errors import DimensionError


class Precision(str, Enum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def dtype(self):
        return np.dtype(self.value)


# Reductions in 32-bit mode run in this dtype and are rounded afterwards
ACCUMULATOR = np.float64


def accumulate(values):
    """Promote to the accumulator dtype without copying float64 input."""
    return np.asarray(values, dtype=ACCUMULATOR)


def all_finite(values):
    return bool(np.all(np.isfinite(values)))


def require_shape(name, array, ndim=None, shape=None):
    if ndim is not None and array.ndim != ndim:
        raise DimensionError(
            f"{name} must have {ndim} dimensions, got shape {tuple(array.shape)}"
        )
    if shape is not None and tuple(array.shape) != tuple(shape):
        raise DimensionError(
            f"{name} must have shape {tuple(shape)}, got {tuple(array.shape)}"
        )


def frobenius(a, b):
    """Frobenius inner product <a, b>, accumulated in 64-bit."""
    return float(np.sum(accumulate(a) * accumulate(b)))
