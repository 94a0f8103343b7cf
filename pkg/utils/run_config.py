"""
Run configuration: typed sections with every default pre-filled, and the
plain-text grammar used by config files:

    # comment
    section.key = value

Unknown keys, repeated keys, malformed lines and values of the wrong type
are errors naming the offending line.
"""

from dataclasses import asdict, dataclass, field, fields, replace

from models.layers import build_architecture
from utils.errors import ConfigError

INPUT_SHAPES = {"mnist": (1, 28, 28), "cifar10": (3, 32, 32), "cifar100": (3, 32, 32)}
NUM_CLASSES = {"mnist": 10, "cifar10": 10, "cifar100": 100}


def _choice(*options):
    return {"choices": options}


@dataclass(frozen=True)
class TrainConfig:
    timesteps: int = 25
    batch_size: int = 64
    epochs: int = 120
    lr: float = 0.3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay: float = 0.1
    seed: int = 0
    checkpoint_every: int = 0
    log_wall_time: bool = True
    precision: str = field(default="float32", metadata=_choice("float32", "float64"))

    def validate(self):
        if self.timesteps < 1:
            raise ConfigError(f"train.timesteps must be >= 1, got {self.timesteps}")
        if not self.lr > 0:
            raise ConfigError(f"train.lr must be > 0, got {self.lr}")
        if self.batch_size < 2:
            raise ConfigError(f"train.batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"train.epochs must be >= 1, got {self.epochs}")

    @property
    def lr_milestones(self):
        """Epochs at which the learning rate is decayed (50%, 70%, 90%)."""
        return tuple(self.epochs * pct // 100 for pct in (50, 70, 90))


@dataclass(frozen=True)
class NeuronConfig:
    threshold: float = 1.0
    leak: float = 0.99
    alpha: float = 0.3
    spike_fn: str = field(default="heaviside", metadata=_choice("heaviside", "smooth"))
    detach_reset: bool = True

    def validate(self):
        if not self.threshold > 0:
            raise ConfigError(f"neuron.threshold must be > 0, got {self.threshold}")
        if not 0 < self.leak <= 1:
            raise ConfigError(f"neuron.leak must lie in (0, 1], got {self.leak}")
        if not self.alpha > 0:
            raise ConfigError(f"neuron.alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class BnttConfig:
    epsilon: float = 1e-5
    ema_rho: float = 0.1

    def validate(self):
        if not self.epsilon > 0:
            raise ConfigError(f"bntt.epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.ema_rho <= 1:
            raise ConfigError(f"bntt.ema_rho must lie in (0, 1], got {self.ema_rho}")


@dataclass(frozen=True)
class NetworkConfig:
    architecture: str = field(
        default="vgg9", metadata=_choice("mlp", "small_conv", "vgg9", "vgg11")
    )
    norm: str = field(default="bntt", metadata=_choice("bntt", "shared-bn", "none"))
    delayed_layer_input: bool = False

    def validate(self):
        pass


@dataclass(frozen=True)
class DataConfig:
    dataset: str = field(default="cifar10", metadata=_choice("mnist", "cifar10", "cifar100"))
    augment: bool = True
    crop_padding: int = 4
    horizontal_flip: bool = True
    train_limit: int = 0
    test_limit: int = 0

    def validate(self):
        if self.crop_padding < 0:
            raise ConfigError(f"data.crop_padding must be >= 0, got {self.crop_padding}")
        if self.train_limit < 0 or self.test_limit < 0:
            raise ConfigError("data.train_limit and data.test_limit must be >= 0")


@dataclass(frozen=True)
class AnalysisConfig:
    exit_rule: str = field(
        default="last-above", metadata=_choice("last-above", "first-all-below")
    )

    def validate(self):
        pass


SECTIONS = {
    "train": TrainConfig,
    "neuron": NeuronConfig,
    "bntt": BnttConfig,
    "network": NetworkConfig,
    "data": DataConfig,
    "analysis": AnalysisConfig,
}


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    bntt: BnttConfig = field(default_factory=BnttConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    data: DataConfig = field(default_factory=DataConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def validate(self):
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    def net_spec(self):
        return build_architecture(
            self.network.architecture,
            INPUT_SHAPES[self.data.dataset],
            NUM_CLASSES[self.data.dataset],
            self.network.norm,
        )

    def with_seed(self, seed):
        return replace(self, train=replace(self.train, seed=seed))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        sections = {}
        for name, section_cls in SECTIONS.items():
            values = data.get(name, {})
            known = {f.name for f in fields(section_cls)}
            unknown = set(values) - known
            if unknown:
                raise ConfigError(f"Unknown keys in section {name}: {sorted(unknown)}")
            sections[name] = section_cls(**values)
        return cls(**sections).validate()


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(raw, f, line_number):
    kind = f.type if isinstance(f.type, type) else {"int": int, "float": float, "bool": bool, "str": str}[f.type]
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                value = True
            elif lowered in _FALSE:
                value = False
            else:
                raise ValueError(raw)
        elif kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
        else:
            value = raw.strip("\"'")
    except ValueError:
        raise ConfigError(
            f"value {raw!r} for {f.name} is not a valid {kind.__name__}", line_number
        )
    choices = f.metadata.get("choices")
    if choices and value not in choices:
        raise ConfigError(
            f"value {value!r} for {f.name} must be one of {list(choices)}", line_number
        )
    return value


def parse_config_text(text):
    """Parse config text into a validated ``RunConfig``."""
    overrides = {name: {} for name in SECTIONS}
    seen = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'section.key = value', got {content!r}", line_number)
        key, raw = (part.strip() for part in content.split("=", 1))
        if key.count(".") != 1 or not raw:
            raise ConfigError(f"expected 'section.key = value', got {content!r}", line_number)
        section, name = key.split(".")
        section_cls = SECTIONS.get(section)
        known = {f.name: f for f in fields(section_cls)} if section_cls else {}
        if name not in known:
            raise ConfigError(f"unknown key {key!r}", line_number)
        if key in seen:
            raise ConfigError(f"{key!r} already set on line {seen[key]}", line_number)
        seen[key] = line_number
        overrides[section][name] = _convert(raw, known[name], line_number)

    sections = {name: cls(**overrides[name]) for name, cls in SECTIONS.items()}
    return RunConfig(**sections).validate()


def parse_config(path):
    """Read a config file; returns (RunConfig, NetSpec)."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    config = parse_config_text(text)
    return config, config.net_spec()
