"""
Batch Normalization Through Time.

Every timestep t owns its own scale gamma[t] and running statistics
(running_mean[t], running_var[t]). Statistics are per channel: conv inputs
[m, C, H, W] reduce over batch and spatial axes, linear inputs [m, C] over the
batch. There is no shift term. With ``time_shared`` the layer keeps a single
slot used at every timestep (standard BN applied through time).
"""

from dataclasses import dataclass, field

import numpy as np

from numerics.tensor import accumulate
from utils.errors import BnttError, StatsNotPopulatedError

DEFAULT_EPSILON = 1e-5
DEFAULT_EMA_RHO = 0.1


@dataclass
class BnttLayer:
    timesteps: int
    channels: int
    gamma: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    update_count: np.ndarray
    epsilon: float = DEFAULT_EPSILON
    ema_rho: float = DEFAULT_EMA_RHO
    time_shared: bool = False

    @classmethod
    def create(
        cls,
        timesteps,
        channels,
        dtype=np.float32,
        epsilon=DEFAULT_EPSILON,
        ema_rho=DEFAULT_EMA_RHO,
        time_shared=False,
    ):
        if timesteps < 1 or channels < 1:
            raise BnttError(f"Need T >= 1 and C >= 1, got T={timesteps}, C={channels}")
        if not epsilon > 0:
            raise BnttError(f"epsilon must be > 0, got {epsilon}")
        if not 0 < ema_rho <= 1:
            raise BnttError(f"ema_rho must lie in (0, 1], got {ema_rho}")
        slots = 1 if time_shared else timesteps
        return cls(
            timesteps=timesteps,
            channels=channels,
            gamma=np.ones((slots, channels), dtype=dtype),
            running_mean=np.zeros((slots, channels), dtype=dtype),
            running_var=np.ones((slots, channels), dtype=dtype),
            update_count=np.zeros(slots, dtype=np.int64),
            epsilon=epsilon,
            ema_rho=ema_rho,
            time_shared=time_shared,
        )

    @property
    def slots(self):
        return self.gamma.shape[0]

    def slot(self, t):
        if not 0 <= t < self.timesteps:
            raise BnttError(f"Timestep {t} outside [0, {self.timesteps})")
        return 0 if self.time_shared else t

    @property
    def populated(self):
        return bool(np.all(self.update_count > 0))


@dataclass
class BnttBatchCache:
    """What the backward pass of one (layer, timestep) forward needs."""

    slot: int
    x_hat: np.ndarray  # float64, same shape as x
    inv_std: np.ndarray  # float64 [C]
    gamma: np.ndarray  # float64 [C]
    count: int  # reduction size m (batch x spatial)
    train: bool = True
    dtype: np.dtype = field(default=np.dtype(np.float32))


def _layout(layer, x):
    if x.ndim not in (2, 4) or x.shape[1] != layer.channels:
        raise BnttError(
            f"Expected [m, {layer.channels}] or [m, {layer.channels}, H, W], "
            f"got {tuple(x.shape)}"
        )
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    view = (1, layer.channels) if x.ndim == 2 else (1, layer.channels, 1, 1)
    return axes, view


def bntt_forward_train(layer, x, t):
    """
    Normalize with the batch statistics of timestep ``t`` (biased variance),
    scale by gamma[t], and fold the statistics into the running averages.
    """
    slot = layer.slot(t)
    if x.shape[0] < 2:
        raise BnttError(f"Training-mode normalization needs batch size >= 2, got {x.shape[0]}")
    axes, view = _layout(layer, x)
    x64 = accumulate(x)
    mean = x64.mean(axis=axes)
    var = ((x64 - mean.reshape(view)) ** 2).mean(axis=axes)
    inv_std = 1.0 / np.sqrt(var + layer.epsilon)
    x_hat = (x64 - mean.reshape(view)) * inv_std.reshape(view)
    gamma = accumulate(layer.gamma[slot])
    y = (gamma.reshape(view) * x_hat).astype(x.dtype, copy=False)

    rho = layer.ema_rho
    dtype = layer.running_mean.dtype
    layer.running_mean[slot] = (
        (1.0 - rho) * accumulate(layer.running_mean[slot]) + rho * mean
    ).astype(dtype)
    layer.running_var[slot] = (
        (1.0 - rho) * accumulate(layer.running_var[slot]) + rho * var
    ).astype(dtype)
    layer.update_count[slot] += 1

    count = x.size // layer.channels
    cache = BnttBatchCache(slot, x_hat, inv_std, gamma, count, True, x.dtype)
    return y, cache


def _eval(layer, x, t):
    slot = layer.slot(t)
    if layer.update_count[slot] == 0:
        raise StatsNotPopulatedError(
            f"Running statistics of timestep {t} were never populated by training"
        )
    axes, view = _layout(layer, x)
    inv_std = 1.0 / np.sqrt(accumulate(layer.running_var[slot]) + layer.epsilon)
    x_hat = (accumulate(x) - accumulate(layer.running_mean[slot]).reshape(view)) * (
        inv_std.reshape(view)
    )
    gamma = accumulate(layer.gamma[slot])
    y = (gamma.reshape(view) * x_hat).astype(x.dtype, copy=False)
    return y, BnttBatchCache(slot, x_hat, inv_std, gamma, x.size // layer.channels, False, x.dtype)


def bntt_forward_eval(layer, x, t):
    """gamma[t] * (x - running_mean[t]) / sqrt(running_var[t] + eps), per sample."""
    y, _ = _eval(layer, x, t)
    return y


def bntt_forward_eval_cached(layer, x, t):
    """Eval-mode forward that also returns a cache for input gradients."""
    return _eval(layer, x, t)


def bntt_backward(cache, grad_y):
    """
    Returns (grad_x, grad_gamma[C]). In training mode grad_x follows the
    batch-statistics adjoint
        dx_b = inv_std / m * (m g_b - sum_k g_k - x_hat_b * sum_k g_k x_hat_k)
    with g = gamma * grad_y; in eval mode the statistics are constants.
    """
    if grad_y.shape != cache.x_hat.shape:
        raise BnttError(
            f"grad_y shape {tuple(grad_y.shape)} does not match cached "
            f"shape {tuple(cache.x_hat.shape)}"
        )
    channels = cache.gamma.shape[0]
    axes = (0,) if grad_y.ndim == 2 else (0, 2, 3)
    view = (1, channels) if grad_y.ndim == 2 else (1, channels, 1, 1)
    gy = accumulate(grad_y)
    grad_gamma = (gy * cache.x_hat).sum(axis=axes)
    g = gy * cache.gamma.reshape(view)
    if cache.train:
        m = cache.count
        sum_g = g.sum(axis=axes).reshape(view)
        sum_gx = (g * cache.x_hat).sum(axis=axes).reshape(view)
        grad_x = (cache.inv_std.reshape(view) / m) * (m * g - sum_g - cache.x_hat * sum_gx)
    else:
        grad_x = g * cache.inv_std.reshape(view)
    return grad_x.astype(cache.dtype, copy=False), grad_gamma
