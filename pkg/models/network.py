"""
Unrolled spiking network: parameters, forward simulation over T timesteps and
backpropagation through time with the surrogate derivative.

Layer l at timestep t computes
    x = W_l * input            (conv or linear, no bias)
    y = BNTT_l(x, t)           (or plain x when the layer has no norm)
    u = leak * u_prev + y      then spike/soft-reset for hidden layers.
The output layer never fires; its potential integrates y with leak 1 and the
potential after the last timestep is the network output.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from etl.encoding import check_intensities, poisson_encode
from models.bntt import (
    DEFAULT_EMA_RHO,
    DEFAULT_EPSILON,
    BnttLayer,
    bntt_backward,
    bntt_forward_eval,
    bntt_forward_eval_cached,
    bntt_forward_train,
)
from models.layers import LayerKind, NormKind
from models.neuron import (
    DEFAULT_ALPHA,
    DEFAULT_LEAK,
    DEFAULT_THRESHOLD,
    LifLayerState,
    SurrogateParams,
    integrate,
    lif_step,
    smooth_spike,
    surrogate_grad,
)
from numerics.kernels import (
    avgpool2,
    avgpool2_backward,
    conv2d,
    conv2d_backward,
    linear,
    linear_backward,
)
from numerics.tensor import Precision, accumulate, all_finite
from utils.constants import PassId, StreamLabel
from utils.errors import DimensionError, SnnError, TrainingDivergedError
from utils.logging_config import logger

TRAIN = "train"
EVAL = "eval"


@dataclass(frozen=True)
class SimulationOptions:
    timesteps: int = 25
    threshold: float = DEFAULT_THRESHOLD
    leak: float = DEFAULT_LEAK
    alpha: float = DEFAULT_ALPHA
    spike_fn: str = "heaviside"
    detach_reset: bool = True
    delayed_layer_input: bool = False
    epsilon: float = DEFAULT_EPSILON
    ema_rho: float = DEFAULT_EMA_RHO
    precision: str = Precision.FLOAT32.value

    def __post_init__(self):
        if self.timesteps < 1:
            raise SnnError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.spike_fn not in ("heaviside", "smooth"):
            raise SnnError(f"Unknown spike function {self.spike_fn!r}")
        SurrogateParams(self.alpha)
        Precision(self.precision)

    @property
    def dtype(self):
        return Precision(self.precision).dtype

    @property
    def surrogate(self):
        return SurrogateParams(self.alpha)

    @classmethod
    def from_run_config(cls, config):
        return cls(
            timesteps=config.train.timesteps,
            threshold=config.neuron.threshold,
            leak=config.neuron.leak,
            alpha=config.neuron.alpha,
            spike_fn=config.neuron.spike_fn,
            detach_reset=config.neuron.detach_reset,
            delayed_layer_input=config.network.delayed_layer_input,
            epsilon=config.bntt.epsilon,
            ema_rho=config.bntt.ema_rho,
            precision=config.train.precision,
        )

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class LayerParams:
    spec: object
    weight: Optional[np.ndarray] = None
    norm: Optional[BnttLayer] = None


@dataclass
class NetworkState:
    spec: object
    options: SimulationOptions
    layers: List[LayerParams]
    # momentum buffers keyed by parameter name
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def dtype(self):
        return self.options.dtype

    @property
    def timesteps(self):
        return self.options.timesteps

    def parameters(self):
        """Trainable arrays keyed as '<layer>.weight' and '<layer>.gamma'."""
        params = {}
        for layer in self.layers:
            if layer.weight is not None:
                params[f"{layer.spec.name}.weight"] = layer.weight
            if layer.norm is not None:
                params[f"{layer.spec.name}.gamma"] = layer.norm.gamma
        return params

    def norm_layers(self):
        return [layer for layer in self.layers if layer.norm is not None]


def init_network(spec, options, rng):
    """
    He-normal weights (std sqrt(2 / fan_in)) drawn from the WEIGHT_INIT stream
    of each layer's index; gamma starts at 1, running mean 0, running var 1.
    """
    spec.validate()
    shapes = spec.resolve_shapes()
    layers = []
    for index, (layer_spec, (_, out_shape)) in enumerate(zip(spec.layers, shapes)):
        params = LayerParams(layer_spec)
        if layer_spec.has_weights:
            std = np.sqrt(2.0 / layer_spec.fan_in())
            gen = rng.stream(StreamLabel.WEIGHT_INIT, index)
            params.weight = gen.normal(0.0, std, size=layer_spec.weight_shape()).astype(
                options.dtype
            )
            if layer_spec.norm != NormKind.NONE:
                params.norm = BnttLayer.create(
                    options.timesteps,
                    out_shape[0],
                    dtype=options.dtype,
                    epsilon=options.epsilon,
                    ema_rho=options.ema_rho,
                    time_shared=layer_spec.norm == NormKind.SHARED_BN,
                )
        layers.append(params)
    logger.debug(
        f"[Network] Initialized {spec.name} with {len(spec.layers)} layers, "
        f"T={options.timesteps}, precision={options.precision}"
    )
    return NetworkState(spec, options, layers)


@dataclass
class LayerStep:
    """What one layer consumed and produced at one timestep."""

    input: np.ndarray
    output: np.ndarray
    norm_cache: object = None
    u_pre: Optional[np.ndarray] = None


@dataclass
class Tape:
    mode: str
    timesteps: int
    num_samples: int
    differentiable: bool
    # spike totals over the batch: encoder frames [T], layer outputs [L, T]
    input_counts: np.ndarray
    spike_counts: np.ndarray
    steps: List[List[LayerStep]] = field(default_factory=list)


@dataclass
class Gradients:
    weights: Dict[str, np.ndarray]
    gammas: Dict[str, np.ndarray]
    input: Optional[np.ndarray] = None

    def as_dict(self):
        grads = {f"{name}.weight": g for name, g in self.weights.items()}
        grads.update({f"{name}.gamma": g for name, g in self.gammas.items()})
        return grads


def _as_layer_input(values, dtype):
    return values.astype(dtype, copy=False)


def _weighted(layer, inp):
    spec = layer.spec
    if spec.kind == LayerKind.CONV:
        return conv2d(inp, layer.weight, spec.stride, spec.padding)
    return linear(inp.reshape(inp.shape[0], -1), layer.weight)


def forward_unrolled(
    net,
    images,
    rng,
    mode=EVAL,
    sample_ids=None,
    pass_id=PassId.EVAL,
    timesteps=None,
    differentiable=None,
    record=None,
    frames=None,
):
    """
    Simulate ``timesteps`` (default: all) steps on ``images[B, ...]``.

    Training mode normalizes with batch statistics and updates the running
    averages; eval mode uses the running statistics. Returns (potentials[B, K],
    tape). The tape holds per-step caches when ``differentiable`` (default: in
    training mode) and always holds spike totals for rate statistics.
    ``frames`` replaces Poisson encoding with a precomputed [T, B, ...] train.
    """
    if mode not in (TRAIN, EVAL):
        raise SnnError(f"Unknown forward mode {mode!r}")
    options = net.options
    dtype = options.dtype
    steps_total = options.timesteps if timesteps is None else int(timesteps)
    if not 1 <= steps_total <= options.timesteps:
        raise SnnError(f"timesteps must lie in [1, {options.timesteps}], got {steps_total}")
    if differentiable is None:
        differentiable = mode == TRAIN
    record = differentiable if record is None else record or differentiable

    images = np.asarray(images)
    expected = tuple(net.spec.input_shape)
    if images.ndim != len(expected) + 1 or tuple(images.shape[1:]) != expected:
        raise DimensionError(
            f"Expected images [B, {', '.join(map(str, expected))}], got {tuple(images.shape)}"
        )
    if frames is None:
        check_intensities(images)
    batch = images.shape[0]

    shapes = net.spec.resolve_shapes()
    states = []
    for layer, (_, out_shape) in zip(net.layers, shapes):
        shape = (batch,) + tuple(out_shape)
        if layer.spec.is_output:
            states.append(LifLayerState.accumulator(shape, dtype))
        elif layer.spec.spiking:
            states.append(LifLayerState.zeros(shape, dtype, options.leak, options.threshold))
        else:
            states.append(None)
    previous = [np.zeros((batch,) + tuple(out), dtype=dtype) for _, out in shapes]

    num_layers = len(net.layers)
    tape = Tape(
        mode=mode,
        timesteps=steps_total,
        num_samples=batch,
        differentiable=differentiable,
        input_counts=np.zeros(steps_total, dtype=np.float64),
        spike_counts=np.zeros((num_layers, steps_total), dtype=np.float64),
    )

    for t in range(steps_total):
        if frames is not None:
            frame = np.asarray(frames[t])
        else:
            frame = poisson_encode(images, rng, t, sample_ids=sample_ids, pass_id=pass_id)
        tape.input_counts[t] = float(accumulate(frame).sum())
        current = []
        row = []
        for index, layer in enumerate(net.layers):
            spec = layer.spec
            if index == 0:
                source = frame
            elif options.delayed_layer_input:
                source = previous[index - 1]
            else:
                source = current[index - 1]
            inp = _as_layer_input(source, dtype)

            if spec.kind == LayerKind.AVGPOOL:
                out = avgpool2(inp)
                current.append(out)
                if record:
                    row.append(LayerStep(source, out))
                continue

            x = _weighted(layer, inp)
            cache = None
            if layer.norm is not None:
                if mode == TRAIN:
                    y, cache = bntt_forward_train(layer.norm, x, t)
                elif differentiable:
                    y, cache = bntt_forward_eval_cached(layer.norm, x, t)
                else:
                    y = bntt_forward_eval(layer.norm, x, t)
            else:
                y = x
            y = y.reshape(states[index].u.shape)

            if spec.is_output:
                _, states[index] = lif_step(states[index], y)
                out = states[index].u
                u_pre = None
            elif options.spike_fn == "heaviside":
                u_pre = integrate(states[index], y)
                out, states[index] = lif_step(states[index], y)
            else:
                u_pre = integrate(states[index], y)
                out = smooth_spike(u_pre, options.threshold, options.surrogate.alpha)
                reset = dtype.type(options.threshold) * out
                states[index] = LifLayerState(
                    (u_pre - reset).astype(dtype, copy=False),
                    options.leak,
                    options.threshold,
                )
            if spec.spiking:
                tape.spike_counts[index, t] = float(accumulate(out).sum())
            current.append(out)
            if record:
                row.append(LayerStep(source, out, cache, u_pre))
        if record:
            tape.steps.append(row)
        previous = current

    potentials = states[-1].u
    if not all_finite(potentials):
        raise TrainingDivergedError("Output potentials became non-finite")
    return potentials, tape


def loss_and_output_grad(potentials, labels):
    """
    Batch-mean cross-entropy of softmax(potentials) and its gradient with
    respect to the potentials.
    """
    potentials = np.asarray(potentials)
    labels = np.asarray(labels, dtype=np.int64)
    if potentials.ndim != 2 or labels.shape != (potentials.shape[0],):
        raise DimensionError(
            f"Expected potentials [B, K] and labels [B], got "
            f"{tuple(potentials.shape)} and {tuple(labels.shape)}"
        )
    batch, classes = potentials.shape
    if np.any(labels < 0) or np.any(labels >= classes):
        raise DimensionError(f"Labels must lie in [0, {classes})")
    logits = accumulate(potentials)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    rows = np.arange(batch)
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    grad /= batch
    return loss, grad.astype(potentials.dtype, copy=False)


def backward_bptt(net, tape, output_grad):
    """
    Gradients of the loss with respect to every weight, every gamma slot and
    the input intensities (mean over timesteps of the frame gradients, passing
    straight through the encoder).

    The hidden-layer recurrence per timestep, walking t from last to first:
        g_pre = g_spike * S'(u_pre) + g_carry * (1 - theta * S'(u_pre))
        g_carry(t - 1) = leak * g_pre
    with the reset term dropped under ``detach_reset``.
    """
    if not tape.differentiable:
        raise SnnError("Tape was recorded without gradient caches")
    options = net.options
    dtype = options.dtype
    theta = options.threshold
    steps = tape.timesteps
    num_layers = len(net.layers)
    output_grad = np.asarray(output_grad, dtype=dtype)

    weight_grads = {}
    gamma_grads = {}
    for layer in net.layers:
        if layer.weight is not None:
            weight_grads[layer.spec.name] = np.zeros(layer.weight.shape, dtype=np.float64)
        if layer.norm is not None:
            gamma_grads[layer.spec.name] = np.zeros(layer.norm.gamma.shape, dtype=np.float64)

    pending = [[None] * steps for _ in range(num_layers)]
    carry = [None] * num_layers
    frame_grads = np.zeros(tape.steps[0][0].input.shape, dtype=np.float64)

    for t in reversed(range(steps)):
        for index in reversed(range(num_layers)):
            layer = net.layers[index]
            spec = layer.spec
            step = tape.steps[t][index]
            inp = _as_layer_input(step.input, dtype)

            if spec.kind == LayerKind.AVGPOOL:
                grad_out = pending[index][t]
                if grad_out is None:
                    continue
                grad_in = avgpool2_backward(grad_out, inp.shape)
            else:
                if spec.is_output:
                    grad_y = output_grad
                else:
                    grad_spikes = pending[index][t]
                    if grad_spikes is None:
                        grad_spikes = np.zeros(step.u_pre.shape, dtype=dtype)
                    slope = surrogate_grad(step.u_pre, theta, options.surrogate.alpha)
                    grad_pre = grad_spikes * slope
                    if carry[index] is not None:
                        if options.detach_reset:
                            grad_pre = grad_pre + carry[index]
                        else:
                            grad_pre = grad_pre + carry[index] * (1.0 - theta * slope)
                    carry[index] = (dtype.type(options.leak) * grad_pre).astype(dtype)
                    grad_y = grad_pre.astype(dtype, copy=False)

                if step.norm_cache is not None:
                    x_shape = step.norm_cache.x_hat.shape
                    grad_x, grad_gamma = bntt_backward(
                        step.norm_cache, grad_y.reshape(x_shape)
                    )
                    gamma_grads[spec.name][step.norm_cache.slot] += grad_gamma
                else:
                    grad_x = grad_y

                if spec.kind == LayerKind.CONV:
                    grad_in, grad_w = conv2d_backward(
                        grad_x, inp, layer.weight, spec.stride, spec.padding
                    )
                else:
                    flat = inp.reshape(inp.shape[0], -1)
                    grad_in, grad_w = linear_backward(grad_x, flat, layer.weight)
                    grad_in = grad_in.reshape(inp.shape)
                weight_grads[spec.name] += accumulate(grad_w)

            if index == 0:
                frame_grads += accumulate(grad_in)
                continue
            target = t - 1 if options.delayed_layer_input else t
            if target < 0:
                continue
            if pending[index - 1][target] is None:
                pending[index - 1][target] = grad_in.astype(dtype, copy=True)
            else:
                pending[index - 1][target] += grad_in

    for name, grad in weight_grads.items():
        if not all_finite(grad):
            raise TrainingDivergedError(f"Non-finite gradient for {name}.weight")
    weights = {name: g.astype(dtype) for name, g in weight_grads.items()}
    gammas = {name: g.astype(dtype) for name, g in gamma_grads.items()}
    return Gradients(weights, gammas, (frame_grads / steps).astype(dtype))


def predict(potentials):
    return np.argmax(np.asarray(potentials), axis=1)
