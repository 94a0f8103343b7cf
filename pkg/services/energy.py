"""
Energy models.

CMOS (45 nm, 32-bit float):
    FLOPS_ANN(l) = k^2 * O^2 * C_in * C_out    (conv)
                 = C_in * C_out                (linear)
    FLOPS_SNN(l) = FLOPS_ANN(l) * R_s(input of l)
    E_ANN = sum FLOPS_ANN * E_MAC,  E_SNN = sum FLOPS_SNN * E_AC

Neuromorphic:
    E = spikes per sample * E_dyn + T * E_sta
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

from models.layers import LayerKind
from services.spike_stats import INPUT_LAYER, spiking_layer_shapes
from utils.constants import EnergyCost
from utils.errors import ArchitectureMismatchError, SnnError
from utils.logging_config import logger


@dataclass(frozen=True)
class EnergyTable:
    e_mult: float = EnergyCost.E_MULT
    e_add: float = EnergyCost.E_ADD
    e_mac: float = EnergyCost.E_MAC
    e_ac: float = EnergyCost.E_AC
    e_dyn: float = EnergyCost.E_DYN
    e_sta: float = EnergyCost.E_STA

    def __post_init__(self):
        if not math.isclose(self.e_mac, self.e_mult + self.e_add, rel_tol=1e-12):
            raise SnnError(
                f"E_MAC ({self.e_mac}) must equal E_MULT + E_ADD ({self.e_mult + self.e_add})"
            )


@dataclass(frozen=True)
class LayerFlops:
    name: str
    kind: str
    flops: int


@dataclass
class LayerEnergy:
    name: str
    flops_ann: int
    input_layer: str
    input_rate: float
    flops_snn: float


@dataclass
class EnergyReport:
    layers: List[LayerEnergy] = field(default_factory=list)
    e_ann: float = 0.0
    e_snn: float = 0.0
    spikes_per_sample: float = 0.0
    timesteps: int = 0
    neuromorphic: float = 0.0
    neuromorphic_reference: Optional[float] = None

    @property
    def ratio(self):
        """E_ANN / E_SNN; infinite when the SNN spends no energy."""
        return self.e_ann / self.e_snn if self.e_snn > 0 else math.inf

    @property
    def neuromorphic_normalized(self):
        if not self.neuromorphic_reference:
            return self.neuromorphic
        return self.neuromorphic / self.neuromorphic_reference


def flops_ann(net_spec):
    """Per compute layer multiply-accumulate counts of the equivalent ANN."""
    counts = []
    for layer, (_, out_shape) in zip(net_spec.layers, net_spec.resolve_shapes()):
        if layer.kind == LayerKind.CONV:
            flops = (
                layer.kernel_size**2
                * out_shape[1]
                * out_shape[2]
                * layer.in_channels
                * layer.out_channels
            )
        elif layer.kind == LayerKind.LINEAR:
            flops = layer.in_channels * layer.out_channels
        elif layer.kind == LayerKind.AVGPOOL:
            continue
        else:
            raise SnnError(f"Unknown layer kind {layer.kind!r} in {layer.name}")
        counts.append(LayerFlops(layer.name, LayerKind(layer.kind).value, int(flops)))
    return counts


def neuromorphic_energy(spikes_per_sample, timesteps, table=EnergyTable()):
    return spikes_per_sample * table.e_dyn + timesteps * table.e_sta


def _input_sources(net_spec):
    """Map each compute layer to the spiking layer (or encoder) feeding it."""
    sources = {}
    current = INPUT_LAYER
    for layer in net_spec.layers:
        if layer.has_weights:
            sources[layer.name] = current
            if layer.spiking:
                current = layer.name
    return sources


def energy_report(net_spec, stats, table=EnergyTable(), reference_neuromorphic=None):
    """
    CMOS and neuromorphic energy of a run whose spike statistics were
    collected on ``net_spec``.
    """
    expected = [name for name, _ in spiking_layer_shapes(net_spec)]
    if list(stats.layer_names) != expected:
        raise ArchitectureMismatchError(
            f"Spike statistics cover layers {list(stats.layer_names)}, "
            f"{net_spec.name} has {expected}"
        )
    counts = dict(spiking_layer_shapes(net_spec))
    for name, neurons in zip(stats.layer_names, stats.neuron_counts):
        if counts[name] != int(neurons):
            raise ArchitectureMismatchError(
                f"Layer {name}: statistics count {int(neurons)} neurons, "
                f"architecture has {counts[name]}"
            )

    sources = _input_sources(net_spec)
    report = EnergyReport(
        timesteps=stats.timesteps, neuromorphic_reference=reference_neuromorphic
    )
    for entry in flops_ann(net_spec):
        source = sources[entry.name]
        rate = stats.rate(source)
        report.layers.append(
            LayerEnergy(entry.name, entry.flops, source, rate, entry.flops * rate)
        )
    report.e_ann = sum(layer.flops_ann for layer in report.layers) * table.e_mac
    report.e_snn = sum(layer.flops_snn for layer in report.layers) * table.e_ac
    report.spikes_per_sample = stats.hidden_spikes_per_sample()
    report.neuromorphic = neuromorphic_energy(
        report.spikes_per_sample, stats.timesteps, table
    )
    logger.info(
        f"[Energy] {net_spec.name}: E_ANN={report.e_ann:.4g} pJ, "
        f"E_SNN={report.e_snn:.4g} pJ, ratio={report.ratio:.4g}"
    )
    return report
