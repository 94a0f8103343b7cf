"""
Threshold equivalence of BNTT.

With running mean 0 an eval-mode BNTT neuron integrates c_t * x_t where
c_t = gamma_t / sqrt(var_t + eps). Dividing through by c shows that, for a
constant c, it fires exactly like a plain LIF neuron that integrates x_t
against threshold theta / c. With c varying over time the two only agree
approximately; the check then reports the Hamming distance.
"""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from models.bntt import BnttLayer, bntt_forward_eval
from models.neuron import DEFAULT_LEAK, DEFAULT_THRESHOLD, LifLayerState, lif_step
from numerics.rng import Rng
from utils.constants import StreamLabel
from utils.errors import AnalysisError


@dataclass(frozen=True)
class EquivalenceConfig:
    timesteps: int = 50
    num_streams: int = 1000
    threshold: float = DEFAULT_THRESHOLD
    leak: float = DEFAULT_LEAK
    # scalars apply at every timestep; sequences give one value per timestep
    gamma: Union[float, Sequence[float]] = 1.0
    running_var: Union[float, Sequence[float]] = 3.75
    epsilon: float = 0.25
    seed: int = 0
    precision: str = "float64"


@dataclass
class EquivalenceResult:
    bntt_spikes: np.ndarray  # [T, N] uint8
    lif_spikes: np.ndarray  # [T, N] uint8
    scale: np.ndarray  # c_t, [T]

    @property
    def hamming(self):
        return int(np.count_nonzero(self.bntt_spikes != self.lif_spikes))

    @property
    def identical(self):
        return self.hamming == 0


def _per_step(value, timesteps, name):
    values = np.asarray(value, dtype=np.float64)
    if values.ndim == 0:
        return np.full(timesteps, float(values))
    if values.shape != (timesteps,):
        raise AnalysisError(
            f"{name} needs one value per timestep ({timesteps}), got shape {values.shape}"
        )
    return values


def threshold_equivalence_check(config=EquivalenceConfig()):
    """
    Simulate (a) a BNTT neuron with threshold theta and (b) a plain LIF neuron
    with threshold theta / c_t on identical random inputs.
    """
    steps = config.timesteps
    dtype = np.dtype(config.precision)
    gamma = _per_step(config.gamma, steps, "gamma")
    running_var = _per_step(config.running_var, steps, "running_var")
    scale = gamma / np.sqrt(running_var + config.epsilon)
    if np.any(scale <= 0):
        raise AnalysisError(f"Scale gamma / sqrt(var + eps) must be > 0, got {scale.min()}")

    norm = BnttLayer.create(steps, 1, dtype=dtype, epsilon=config.epsilon)
    norm.gamma[:, 0] = gamma
    norm.running_var[:, 0] = running_var
    norm.running_mean[:] = 0
    norm.update_count[:] = 1

    gen = Rng(config.seed).stream(StreamLabel.EQUIVALENCE, steps, config.num_streams)
    # inputs large enough relative to theta / c that both neurons fire often
    inputs = gen.uniform(
        0.0, 1.5 * config.threshold / float(scale.mean()), size=(steps, config.num_streams, 1)
    ).astype(dtype)

    bntt_state = LifLayerState.zeros((config.num_streams, 1), dtype, config.leak, config.threshold)
    lif_state = LifLayerState.zeros((config.num_streams, 1), dtype, config.leak, config.threshold)
    bntt_spikes = np.zeros((steps, config.num_streams), dtype=np.uint8)
    lif_spikes = np.zeros((steps, config.num_streams), dtype=np.uint8)
    for t in range(steps):
        y = bntt_forward_eval(norm, inputs[t], t)
        spikes, bntt_state = lif_step(bntt_state, y)
        bntt_spikes[t] = spikes[:, 0]

        lif_state = LifLayerState(lif_state.u, config.leak, config.threshold / scale[t])
        spikes, lif_state = lif_step(lif_state, inputs[t])
        lif_spikes[t] = spikes[:, 0]
    return EquivalenceResult(bntt_spikes, lif_spikes, scale)
