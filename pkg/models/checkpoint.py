"""
Checkpoint container.

    8 bytes   magic b"BNTTCKPT"
    4 bytes   manifest length, unsigned little-endian
    N bytes   UTF-8 JSON manifest
    ...       raw little-endian float32 arrays, in manifest order

The manifest carries the format version, the architecture, the simulation
options (T, threshold, leak, epsilon, ...), seed, epoch, the full run config
when available, BN update counters and an array table (name, shape, offset,
nbytes) with offsets relative to the first array byte.
"""

import json
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.bntt import BnttLayer
from models.layers import NetSpec, NormKind
from models.network import LayerParams, NetworkState, SimulationOptions
from utils.errors import ArchitectureMismatchError, CheckpointError, SnnError
from utils.logging_config import logger

MAGIC = b"BNTTCKPT"
FORMAT_VERSION = 1
ARRAY_DTYPE = np.dtype("<f4")
_LENGTH = struct.Struct("<I")


@dataclass
class Checkpoint:
    net: NetworkState
    epoch: int
    seed: int
    config: Optional[dict] = None


def _named_arrays(net):
    arrays = []
    for layer in net.layers:
        name = layer.spec.name
        if layer.weight is not None:
            arrays.append((f"{name}.weight", layer.weight))
        if layer.norm is not None:
            arrays.append((f"{name}.gamma", layer.norm.gamma))
            arrays.append((f"{name}.running_mean", layer.norm.running_mean))
            arrays.append((f"{name}.running_var", layer.norm.running_var))
    for key in sorted(net.velocity):
        arrays.append((f"velocity:{key}", net.velocity[key]))
    return arrays


def encode_checkpoint(net, epoch=0, seed=0, config=None):
    """Serialize to bytes; identical state always yields identical bytes."""
    table = []
    payload = []
    offset = 0
    for name, array in _named_arrays(net):
        data = np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes()
        table.append(
            {"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(data)}
        )
        payload.append(data)
        offset += len(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "architecture": net.spec.to_dict(),
        "options": net.options.to_dict(),
        "seed": int(seed),
        "epoch": int(epoch),
        "config": config,
        "bn_update_counts": {
            layer.spec.name: [int(c) for c in layer.norm.update_count]
            for layer in net.layers
            if layer.norm is not None
        },
        "dtype": ARRAY_DTYPE.str,
        "arrays": table,
    }
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LENGTH.pack(len(text)) + text + b"".join(payload)


def save_checkpoint(path, net, epoch=0, seed=0, config=None):
    blob = encode_checkpoint(net, epoch, seed, config)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except OSError as e:
        logger.error(f"[Checkpoint] Failed to write {path}: {e}", exc_info=True)
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}")
    logger.info(f"[Checkpoint] Saved epoch {epoch} to {path} ({len(blob)} bytes)")
    return path


def _read_manifest(blob, source):
    header = len(MAGIC) + _LENGTH.size
    if len(blob) < header or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic)")
    (length,) = _LENGTH.unpack_from(blob, len(MAGIC))
    if header + length > len(blob):
        raise CheckpointError(f"{source}: manifest truncated")
    try:
        manifest = json.loads(blob[header : header + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: corrupt manifest: {e}")
    if not isinstance(manifest, dict):
        raise CheckpointError(f"{source}: manifest is not an object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{source}: format version {version!r}, expected {FORMAT_VERSION}"
        )
    return manifest, header + length


def _expected_shapes(spec, timesteps):
    expected = {}
    for layer, (_, out_shape) in zip(spec.layers, spec.resolve_shapes()):
        if not layer.has_weights:
            continue
        expected[f"{layer.name}.weight"] = tuple(layer.weight_shape())
        if layer.norm != NormKind.NONE:
            slots = 1 if layer.norm == NormKind.SHARED_BN else timesteps
            for suffix in ("gamma", "running_mean", "running_var"):
                expected[f"{layer.name}.{suffix}"] = (slots, out_shape[0])
    return expected


def decode_checkpoint(blob, source="<bytes>", expected_spec=None):
    manifest, data_start = _read_manifest(blob, source)
    try:
        spec = NetSpec.from_dict(manifest["architecture"])
        spec.validate()
        options = SimulationOptions(**manifest["options"])
        table = manifest["arrays"]
        counts = manifest["bn_update_counts"]
    except (KeyError, TypeError, ValueError, SnnError) as e:
        raise CheckpointError(f"{source}: invalid manifest: {e}")
    if expected_spec is not None and expected_spec.to_dict() != spec.to_dict():
        raise ArchitectureMismatchError(
            f"{source}: checkpoint architecture {spec.name} does not match the "
            f"requested {expected_spec.name}"
        )

    expected = _expected_shapes(spec, options.timesteps)
    arrays = {}
    payload = len(blob) - data_start
    end = 0
    for entry in table:
        try:
            name = entry["name"]
            shape = tuple(int(d) for d in entry["shape"])
            offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"{source}: malformed array entry: {e}")
        if name.startswith("velocity:"):
            want = expected.get(name.split(":", 1)[1])
        else:
            want = expected.get(name)
        if want is None or shape != want:
            raise CheckpointError(f"{source}: array {name} has shape {shape}, expected {want}")
        if nbytes != int(np.prod(shape, dtype=np.int64)) * ARRAY_DTYPE.itemsize:
            raise CheckpointError(f"{source}: array {name} declares {nbytes} bytes for {shape}")
        if offset != end or offset + nbytes > payload:
            raise CheckpointError(f"{source}: array {name} lies outside the payload")
        start = data_start + offset
        arrays[name] = np.frombuffer(blob, ARRAY_DTYPE, count=nbytes // 4, offset=start).reshape(
            shape
        )
        end = offset + nbytes
    if end != payload:
        raise CheckpointError(f"{source}: {payload - end} trailing bytes after arrays")
    missing = [name for name in expected if name not in arrays]
    if missing:
        raise CheckpointError(f"{source}: missing arrays {missing}")

    dtype = options.dtype
    layers = []
    for layer_spec in spec.layers:
        params = LayerParams(layer_spec)
        name = layer_spec.name
        if layer_spec.has_weights:
            params.weight = arrays[f"{name}.weight"].astype(dtype)
            if layer_spec.norm != NormKind.NONE:
                gamma = arrays[f"{name}.gamma"]
                layer_counts = counts.get(name)
                if layer_counts is None or len(layer_counts) != gamma.shape[0]:
                    raise CheckpointError(f"{source}: bad update counts for {name}")
                params.norm = BnttLayer(
                    timesteps=options.timesteps,
                    channels=gamma.shape[1],
                    gamma=gamma.astype(dtype),
                    running_mean=arrays[f"{name}.running_mean"].astype(dtype),
                    running_var=arrays[f"{name}.running_var"].astype(dtype),
                    update_count=np.asarray(layer_counts, dtype=np.int64),
                    epsilon=options.epsilon,
                    ema_rho=options.ema_rho,
                    time_shared=layer_spec.norm == NormKind.SHARED_BN,
                )
        layers.append(params)
    velocity = {
        name.split(":", 1)[1]: array.astype(dtype)
        for name, array in arrays.items()
        if name.startswith("velocity:")
    }
    net = NetworkState(spec, options, layers, velocity)
    return Checkpoint(net, int(manifest.get("epoch", 0)), int(manifest.get("seed", 0)), manifest.get("config"))


def load_checkpoint(path, expected_spec=None):
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}")
    checkpoint = decode_checkpoint(blob, str(path), expected_spec)
    logger.info(
        f"[Checkpoint] Loaded {checkpoint.net.spec.name} (epoch {checkpoint.epoch}) from {path}"
    )
    return checkpoint
