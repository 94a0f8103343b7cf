"""
Linear-algebra kernels: dense layer, 2-D cross-correlation, 2x2 average pooling,
each with its exact adjoint. All reductions run in 64-bit and the result is
rounded back to the dtype of the primary input.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from numerics.tensor import accumulate, require_shape
from utils.errors import DimensionError


def linear(x, weight):
    """x[B, D] @ weight[Out, D].T -> [B, Out]"""
    require_shape("linear input", x, ndim=2)
    require_shape("linear weight", weight, ndim=2)
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"linear input has {x.shape[1]} features but weight expects {weight.shape[1]}"
        )
    out = accumulate(x) @ accumulate(weight).T
    return out.astype(x.dtype, copy=False)


def linear_backward(grad_out, x, weight):
    """Adjoints of ``linear``: returns (grad_input, grad_weight)."""
    require_shape("linear grad_out", grad_out, shape=(x.shape[0], weight.shape[0]))
    g = accumulate(grad_out)
    grad_input = g @ accumulate(weight)
    grad_weight = g.T @ accumulate(x)
    return grad_input.astype(x.dtype, copy=False), grad_weight.astype(
        weight.dtype, copy=False
    )


def _conv_geometry(input, kernel, stride, pad):
    require_shape("conv2d input", input, ndim=4)
    require_shape("conv2d kernel", kernel, ndim=4)
    batch, c_in, height, width = input.shape
    c_out, k_in, k, k_w = kernel.shape
    if k != k_w:
        raise DimensionError(f"conv2d kernel must be square, got {k}x{k_w}")
    if k % 2 != 1:
        raise DimensionError(f"conv2d kernel size must be odd, got {k}")
    if k_in != c_in:
        raise DimensionError(
            f"conv2d input has {c_in} channels but kernel expects {k_in}"
        )
    if stride < 1 or pad < 0:
        raise DimensionError(f"conv2d needs stride >= 1 and pad >= 0, got {stride}, {pad}")
    out_h = (height + 2 * pad - k) // stride + 1
    out_w = (width + 2 * pad - k) // stride + 1
    if out_h <= 0 or out_w <= 0:
        raise DimensionError(
            f"conv2d output would be empty for input {height}x{width}, k={k}, pad={pad}"
        )
    return batch, c_in, c_out, k, out_h, out_w


def _columns(input, k, stride, pad, out_h, out_w):
    padded = np.pad(accumulate(input), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))
    windows = windows[:, :, : stride * out_h : stride, : stride * out_w : stride]
    # [B, H', W', Cin, k, k] flattened to one row per output position
    batch, c_in = input.shape[:2]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(
        batch * out_h * out_w, c_in * k * k
    )


def conv2d(input, kernel, stride=1, pad=0):
    """Cross-correlation of input[B, Cin, H, W] with kernel[Cout, Cin, k, k]."""
    batch, _, c_out, k, out_h, out_w = _conv_geometry(input, kernel, stride, pad)
    cols = _columns(input, k, stride, pad, out_h, out_w)
    out = cols @ accumulate(kernel).reshape(c_out, -1).T
    out = out.reshape(batch, out_h, out_w, c_out).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out, dtype=input.dtype)


def conv2d_backward(grad_out, input, kernel, stride=1, pad=0):
    """Adjoints of ``conv2d``: returns (grad_input, grad_kernel)."""
    batch, c_in, c_out, k, out_h, out_w = _conv_geometry(input, kernel, stride, pad)
    require_shape("conv2d grad_out", grad_out, shape=(batch, c_out, out_h, out_w))

    g = accumulate(grad_out).transpose(0, 2, 3, 1).reshape(-1, c_out)
    cols = _columns(input, k, stride, pad, out_h, out_w)
    grad_kernel = (g.T @ cols).reshape(kernel.shape)

    grad_cols = (g @ accumulate(kernel).reshape(c_out, -1)).reshape(
        batch, out_h, out_w, c_in, k, k
    )
    height, width = input.shape[2:]
    grad_padded = np.zeros(
        (batch, c_in, height + 2 * pad, width + 2 * pad), dtype=np.float64
    )
    for i in range(k):
        for j in range(k):
            grad_padded[
                :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
            ] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    grad_input = grad_padded[:, :, pad : pad + height, pad : pad + width]
    return (
        np.ascontiguousarray(grad_input, dtype=input.dtype),
        grad_kernel.astype(kernel.dtype, copy=False),
    )


def _pool_shape(input):
    require_shape("avgpool2 input", input, ndim=4)
    batch, channels, height, width = input.shape
    if height % 2 or width % 2:
        raise DimensionError(
            f"avgpool2 needs even spatial extents, got {height}x{width}"
        )
    return batch, channels, height // 2, width // 2


def avgpool2(input):
    batch, channels, out_h, out_w = _pool_shape(input)
    windows = accumulate(input).reshape(batch, channels, out_h, 2, out_w, 2)
    return windows.mean(axis=(3, 5)).astype(input.dtype, copy=False)


def avgpool2_backward(grad_out, input_shape):
    """Spread each output gradient uniformly (x 1/4) over its 2x2 window."""
    batch, channels, height, width = input_shape
    require_shape(
        "avgpool2 grad_out", grad_out, shape=(batch, channels, height // 2, width // 2)
    )
    spread = np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3)
    return (spread * 0.25).astype(grad_out.dtype, copy=False)
