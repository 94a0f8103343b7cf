"""
Leaky integrate-and-fire dynamics with soft reset, and the triangular surrogate
derivative used in place of the spike nonlinearity during backpropagation.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from numerics.tensor import all_finite
from utils.errors import NeuronError

DEFAULT_THRESHOLD = 1.0
DEFAULT_LEAK = 0.99
DEFAULT_ALPHA = 0.3


@dataclass(frozen=True)
class SurrogateParams:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0:
            raise NeuronError(f"Surrogate damping alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class LifLayerState:
    """Membrane potentials ``u`` of one layer plus its leak and threshold."""

    u: np.ndarray
    leak: float = DEFAULT_LEAK
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not 0.0 < self.leak <= 1.0:
            raise NeuronError(f"Leak must lie in (0, 1], got {self.leak}")
        if not self.threshold > 0:
            raise NeuronError(f"Threshold must be > 0, got {self.threshold}")

    @classmethod
    def zeros(cls, shape, dtype=np.float32, leak=DEFAULT_LEAK, threshold=DEFAULT_THRESHOLD):
        return cls(np.zeros(shape, dtype=dtype), leak, threshold)

    @classmethod
    def accumulator(cls, shape, dtype=np.float32):
        """Output-layer state: no leak, never fires."""
        return cls(np.zeros(shape, dtype=dtype), 1.0, math.inf)

    @property
    def is_accumulator(self):
        return math.isinf(self.threshold)


def integrate(state, weighted_input):
    """u_pre = leak * u_prev + input"""
    if weighted_input.shape != state.u.shape:
        raise NeuronError(
            f"Input shape {tuple(weighted_input.shape)} does not match membrane "
            f"shape {tuple(state.u.shape)}"
        )
    if not all_finite(weighted_input):
        raise NeuronError("Non-finite weighted input to LIF layer")
    dtype = state.u.dtype
    return (dtype.type(state.leak) * state.u + weighted_input).astype(dtype, copy=False)


def lif_step(state, weighted_input):
    """
    One timestep: integrate, fire where u >= threshold, soft-reset fired
    neurons by subtracting the threshold. Returns (spikes uint8, new state).
    """
    u_pre = integrate(state, weighted_input)
    if state.is_accumulator:
        return np.zeros(u_pre.shape, dtype=np.uint8), replace(state, u=u_pre)
    fired = u_pre >= state.threshold
    u_new = np.where(fired, u_pre - u_pre.dtype.type(state.threshold), u_pre)
    return fired.astype(np.uint8), replace(state, u=u_new)


def surrogate_grad(u, theta, alpha=DEFAULT_ALPHA):
    """alpha * max(0, 1 - |(u - theta) / theta|)"""
    if not theta > 0:
        raise NeuronError(f"Threshold must be > 0, got {theta}")
    u = np.asarray(u)
    if not all_finite(u):
        raise NeuronError("Non-finite membrane potential in surrogate gradient")
    dtype = u.dtype if u.dtype.kind == "f" else np.dtype(np.float64)
    hat = np.maximum(0.0, 1.0 - np.abs((u - theta) / theta))
    return (alpha * hat).astype(dtype, copy=False)


def smooth_spike(u, theta, alpha=DEFAULT_ALPHA):
    """
    Piecewise-quadratic antiderivative of ``surrogate_grad`` with value 0 for
    u <= 0 and alpha * theta for u >= 2 * theta. Stands in for the Heaviside
    step when checking gradients by finite differences.
    """
    if not theta > 0:
        raise NeuronError(f"Threshold must be > 0, got {theta}")
    u = np.asarray(u)
    dtype = u.dtype if u.dtype.kind == "f" else np.dtype(np.float64)
    v = np.clip(u, 0.0, 2.0 * theta)
    rising = alpha * v * v / (2.0 * theta)
    falling = alpha * theta - alpha * (2.0 * theta - v) ** 2 / (2.0 * theta)
    return np.where(v <= theta, rising, falling).astype(dtype, copy=False)
