"""
Layer-graph description and the reference architectures.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import List, Tuple

from utils.errors import ArchitectureMismatchError, ConfigError


class LayerKind(str, Enum):
    CONV = "conv"
    LINEAR = "linear"
    AVGPOOL = "avgpool"


class NormKind(str, Enum):
    BNTT = "bntt"
    SHARED_BN = "shared-bn"
    NONE = "none"


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    name: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 3
    stride: int = 1
    padding: int = 1
    norm: NormKind = NormKind.BNTT
    is_output: bool = False

    @property
    def has_weights(self):
        return self.kind in (LayerKind.CONV, LayerKind.LINEAR)

    @property
    def spiking(self):
        return self.has_weights and not self.is_output

    def weight_shape(self):
        if self.kind == LayerKind.CONV:
            k = self.kernel_size
            return (self.out_channels, self.in_channels, k, k)
        if self.kind == LayerKind.LINEAR:
            return (self.out_channels, self.in_channels)
        return None

    def fan_in(self):
        if self.kind == LayerKind.CONV:
            return self.in_channels * self.kernel_size**2
        return self.in_channels

    def to_dict(self):
        data = asdict(self)
        data["kind"] = self.kind.value
        data["norm"] = self.norm.value
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["kind"] = LayerKind(data["kind"])
        data["norm"] = NormKind(data["norm"])
        return cls(**data)


@dataclass(frozen=True)
class NetSpec:
    name: str
    input_shape: Tuple[int, int, int]
    layers: Tuple[LayerSpec, ...]
    num_classes: int

    def __post_init__(self):
        self.validate()

    def validate(self):
        outputs = [i for i, layer in enumerate(self.layers) if layer.is_output]
        if len(outputs) != 1 or outputs[0] != len(self.layers) - 1:
            raise ArchitectureMismatchError(
                f"{self.name}: exactly one output layer is required and it must be last"
            )
        if not self.layers[-1].has_weights:
            raise ArchitectureMismatchError(f"{self.name}: output layer must be conv or linear")
        if self.layers[-1].out_channels != self.num_classes:
            raise ArchitectureMismatchError(
                f"{self.name}: output layer has {self.layers[-1].out_channels} units "
                f"for {self.num_classes} classes"
            )
        self.resolve_shapes()

    def resolve_shapes(self):
        """Per-layer (input_shape, output_shape) without the batch axis."""
        shapes = []
        shape = tuple(self.input_shape)
        for layer in self.layers:
            if layer.kind == LayerKind.CONV:
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    raise ArchitectureMismatchError(
                        f"{layer.name}: expects {layer.in_channels} input channels, got {shape}"
                    )
                c, h, w = shape
                k, s, p = layer.kernel_size, layer.stride, layer.padding
                out = (layer.out_channels, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
                if out[1] <= 0 or out[2] <= 0:
                    raise ArchitectureMismatchError(f"{layer.name}: empty output map")
            elif layer.kind == LayerKind.AVGPOOL:
                if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                    raise ArchitectureMismatchError(
                        f"{layer.name}: average pooling needs an even map, got {shape}"
                    )
                out = (shape[0], shape[1] // 2, shape[2] // 2)
            else:
                features = 1
                for extent in shape:
                    features *= extent
                if features != layer.in_channels:
                    raise ArchitectureMismatchError(
                        f"{layer.name}: expects {layer.in_channels} inputs, got {features}"
                    )
                out = (layer.out_channels,)
            shapes.append((shape, out))
            shape = out
        return shapes

    def to_dict(self):
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data["name"],
            input_shape=tuple(data["input_shape"]),
            layers=tuple(LayerSpec.from_dict(layer) for layer in data["layers"]),
            num_classes=int(data["num_classes"]),
        )


class _Builder:
    """Accumulates layers while tracking channel counts and map size."""

    def __init__(self, input_shape, norm):
        self.channels, self.height, self.width = input_shape
        self.norm = NormKind(norm)
        self.layers: List[LayerSpec] = []
        self.counts = {"conv": 0, "fc": 0, "pool": 0}

    def conv(self, out_channels, kernel_size=3):
        self.counts["conv"] += 1
        self.layers.append(
            LayerSpec(
                LayerKind.CONV,
                f"conv{self.counts['conv']}",
                self.channels,
                out_channels,
                kernel_size,
                1,
                kernel_size // 2,
                self.norm,
            )
        )
        self.channels = out_channels
        return self

    def pool(self):
        self.counts["pool"] += 1
        self.layers.append(LayerSpec(LayerKind.AVGPOOL, f"pool{self.counts['pool']}", norm=NormKind.NONE))
        self.height //= 2
        self.width //= 2
        return self

    def linear(self, out_features, is_output=False):
        self.counts["fc"] += 1
        in_features = self.channels * self.height * self.width
        self.layers.append(
            LayerSpec(
                LayerKind.LINEAR,
                f"fc{self.counts['fc']}",
                in_features,
                out_features,
                norm=self.norm,
                is_output=is_output,
            )
        )
        self.channels, self.height, self.width = out_features, 1, 1
        return self


def mlp(input_shape=(1, 28, 28), num_classes=10, norm=NormKind.BNTT, hidden=256):
    b = _Builder(input_shape, norm).linear(hidden).linear(num_classes, is_output=True)
    return NetSpec("mlp", tuple(input_shape), tuple(b.layers), num_classes)


def small_conv(input_shape=(1, 28, 28), num_classes=10, norm=NormKind.BNTT):
    b = (
        _Builder(input_shape, norm)
        .conv(16)
        .pool()
        .conv(32)
        .pool()
        .linear(num_classes, is_output=True)
    )
    return NetSpec("small_conv", tuple(input_shape), tuple(b.layers), num_classes)


def vgg9(input_shape=(3, 32, 32), num_classes=10, norm=NormKind.BNTT):
    b = _Builder(input_shape, norm).conv(64).conv(64).pool()
    b.conv(128).conv(128).pool()
    b.conv(256).conv(256).conv(256).pool()
    b.linear(1024).linear(num_classes, is_output=True)
    return NetSpec("vgg9", tuple(input_shape), tuple(b.layers), num_classes)


def vgg11(input_shape=(3, 32, 32), num_classes=100, norm=NormKind.BNTT):
    b = _Builder(input_shape, norm).conv(64).pool().conv(128).pool()
    b.conv(256).conv(256).pool()
    b.conv(512).conv(512).pool()
    b.conv(512).conv(512)
    b.linear(4096).linear(4096).linear(num_classes, is_output=True)
    return NetSpec("vgg11", tuple(input_shape), tuple(b.layers), num_classes)


ARCHITECTURES = {"mlp": mlp, "small_conv": small_conv, "vgg9": vgg9, "vgg11": vgg11}


def build_architecture(name, input_shape, num_classes, norm=NormKind.BNTT):
    try:
        factory = ARCHITECTURES[name]
    except KeyError:
        raise ConfigError(
            f"Unknown architecture {name!r}, expected one of {sorted(ARCHITECTURES)}"
        )
    return factory(tuple(input_shape), num_classes, NormKind(norm))
