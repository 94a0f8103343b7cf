"""
Spike-rate accounting: R_s(l) = spikes of layer l over all timesteps / neurons
of layer l, averaged per sample. The encoder is reported as layer "input".
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from utils.errors import ArchitectureMismatchError

INPUT_LAYER = "input"


@dataclass
class SpikeStats:
    layer_names: List[str]
    neuron_counts: np.ndarray  # [L] neurons per sample
    per_timestep: np.ndarray  # [L, T] spikes summed over samples
    num_samples: int

    @property
    def timesteps(self):
        return self.per_timestep.shape[1]

    @property
    def total_spikes(self):
        return self.per_timestep.sum(axis=1)

    @property
    def rates(self):
        if self.num_samples == 0:
            return np.zeros(len(self.layer_names))
        return self.total_spikes / (self.neuron_counts * self.num_samples)

    def rate(self, layer_name):
        try:
            index = self.layer_names.index(layer_name)
        except ValueError:
            raise ArchitectureMismatchError(f"No spike statistics for layer {layer_name!r}")
        return float(self.rates[index])

    def hidden_spikes_per_sample(self):
        """Spikes of all LIF layers (encoder excluded) per sample."""
        if self.num_samples == 0:
            return 0.0
        return float(self.total_spikes[1:].sum()) / self.num_samples

    def scaled(self, factor):
        return SpikeStats(
            list(self.layer_names),
            self.neuron_counts.copy(),
            self.per_timestep * factor,
            self.num_samples,
        )

    def to_rows(self):
        """One row per (layer, timestep) plus the layer's overall rate."""
        rows = []
        rates = self.rates
        for index, name in enumerate(self.layer_names):
            for t in range(self.timesteps):
                rows.append(
                    {
                        "layer": name,
                        "timestep": t + 1,
                        "spikes": float(self.per_timestep[index, t]),
                        "neurons": int(self.neuron_counts[index]),
                        "rate": float(rates[index]),
                    }
                )
        return rows


def spiking_layer_shapes(net_spec):
    """(name, neurons per sample) of the encoder and every LIF layer, in order."""
    entries = [(INPUT_LAYER, int(np.prod(net_spec.input_shape)))]
    for layer, (_, out_shape) in zip(net_spec.layers, net_spec.resolve_shapes()):
        if layer.spiking:
            entries.append((layer.name, int(np.prod(out_shape))))
    return entries


def spike_rate(net_spec, run):
    """
    Build ``SpikeStats`` from a completed run: anything carrying
    ``input_counts[T]``, ``spike_counts[L, T]`` and ``num_samples`` (a forward
    tape or an aggregated evaluation result).
    """
    spike_counts = np.asarray(run.spike_counts, dtype=np.float64)
    if spike_counts.shape[0] != len(net_spec.layers):
        raise ArchitectureMismatchError(
            f"Run has counts for {spike_counts.shape[0]} layers, "
            f"{net_spec.name} has {len(net_spec.layers)}"
        )
    entries = spiking_layer_shapes(net_spec)
    spiking = [i for i, layer in enumerate(net_spec.layers) if layer.spiking]
    per_timestep = np.vstack(
        [np.asarray(run.input_counts, dtype=np.float64)[None, :], spike_counts[spiking]]
    )
    return SpikeStats(
        [name for name, _ in entries],
        np.array([count for _, count in entries], dtype=np.float64),
        per_timestep,
        int(run.num_samples),
    )
