# Copyright (C) 2025 AIDC-AI
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#     http://www.apache.org/licenses/LICENSE-2.0
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Differentiable operations

Arithmetic primitives (each with a hand-written backward):
    matmul, add, mul, layer_norm, masked_softmax, logsumexp,
    depthwise_conv1d, swish, glu, embedding, cross_entropy

Structural ops (views and summation only):
    reshape, transpose, concat, index, sum

Everything else (sub, mean, linear, log_softmax) composes from the above.
All ops broadcast over leading batch dimensions the way numpy does.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from csvmasr.errors import InvalidMaskError, ShapeError
from csvmasr.numerics.tensor import Tensor, as_tensor, unbroadcast

Axis = Optional[Union[int, Tuple[int, ...]]]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form stays finite for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ============================================================================
# Arithmetic primitives
# ============================================================================

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(out, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    """Elementwise (broadcasting) multiply"""
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(out, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    """Batched matrix product; both operands need at least two dimensions"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", f"operands need ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", f"inner dimensions differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return Tensor.from_op(out, (a, b), backward, "matmul")


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift"""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError("layer_norm", f"gain/bias must have shape ({n},)")
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gamma.data + beta.data

    def backward(g):
        grad_normed = g * gamma.data
        grad_x = (inv_std / n) * (
            n * grad_normed
            - grad_normed.sum(axis=-1, keepdims=True)
            - normed * (grad_normed * normed).sum(axis=-1, keepdims=True)
        )
        return grad_x, unbroadcast(g * normed, gamma.shape), unbroadcast(g, beta.shape)

    return Tensor.from_op(out, (x, gamma, beta), backward, "layer_norm")


def masked_softmax(x, mask: Optional[np.ndarray] = None, axis: int = -1) -> Tensor:
    """
    Softmax with inactive positions forced to exactly zero

    Masked logits are replaced by -inf before normalization (exp(-inf) = 0),
    and the max shift uses active entries only, so inactive logits cannot
    influence the result in any bit.

    Args:
        x: Logits
        mask: Boolean array broadcastable to x; None means all active
        axis: Normalization axis

    Raises:
        InvalidMaskError: If some slice along axis has no active entry
    """
    x = as_tensor(x)
    if mask is None:
        logits = x.data
    else:
        active = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not np.all(active.any(axis=axis)):
            raise InvalidMaskError("mask has a slice with no active entry")
        logits = np.where(active, x.data, -np.inf)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    out = exps / exps.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "masked_softmax")


def softmax(x, axis: int = -1) -> Tensor:
    return masked_softmax(x, None, axis=axis)


def logsumexp(x, axis: int = -1, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    peak = x.data.max(axis=axis, keepdims=True)
    total = np.log(np.exp(x.data - peak).sum(axis=axis, keepdims=True)) + peak
    out = total if keepdims else np.squeeze(total, axis=axis)

    def backward(g):
        g = g if keepdims else np.expand_dims(g, axis)
        return (g * np.exp(x.data - total),)

    return Tensor.from_op(out, (x,), backward, "logsumexp")


def depthwise_conv1d(x, weight, bias) -> Tensor:
    """
    Per-channel 1-D convolution over the time axis with 'same' zero padding

    Args:
        x: (..., T, C)
        weight: (K, C) with K odd
        bias: (C,)
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    kernel, channels = weight.shape
    if kernel % 2 == 0:
        raise ShapeError("depthwise_conv1d", f"kernel size must be odd, got {kernel}")
    if x.shape[-1] != channels or bias.shape != (channels,):
        raise ShapeError("depthwise_conv1d", f"channel mismatch: x {x.shape}, weight {weight.shape}")
    steps = x.shape[-2]
    pad = kernel // 2
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (0, 0)]
    padded = np.pad(x.data, widths)
    out = np.broadcast_to(bias.data, x.shape).copy()
    for k in range(kernel):
        out += padded[..., k:k + steps, :] * weight.data[k]

    def backward(g):
        grad_padded = np.zeros_like(padded)
        grad_weight = np.zeros_like(weight.data)
        reduce_axes = tuple(range(g.ndim - 1))
        for k in range(kernel):
            grad_padded[..., k:k + steps, :] += g * weight.data[k]
            grad_weight[k] = (g * padded[..., k:k + steps, :]).sum(axis=reduce_axes)
        grad_x = grad_padded[..., pad:pad + steps, :]
        return grad_x, grad_weight, g.sum(axis=reduce_axes)

    return Tensor.from_op(out, (x, weight, bias), backward, "depthwise_conv1d")


def swish(x) -> Tensor:
    """x * sigmoid(x)"""
    x = as_tensor(x)
    gate = _sigmoid(x.data)
    out = x.data * gate

    def backward(g):
        return (g * (gate + x.data * gate * (1.0 - gate)),)

    return Tensor.from_op(out, (x,), backward, "swish")


def glu(x, axis: int = -1) -> Tensor:
    """Gated linear unit: first half * sigmoid(second half) along axis"""
    x = as_tensor(x)
    if x.shape[axis] % 2:
        raise ShapeError("glu", f"axis {axis} has odd size {x.shape[axis]}")
    value, gate_logits = np.split(x.data, 2, axis=axis)
    gate = _sigmoid(gate_logits)
    out = value * gate

    def backward(g):
        return (np.concatenate([g * gate, g * value * gate * (1.0 - gate)], axis=axis),)

    return Tensor.from_op(out, (x,), backward, "glu")


def embedding(table, ids) -> Tensor:
    """Gather rows of table at integer ids (any shape); output shape ids.shape + (D,)"""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError("embedding", f"ids out of range for table with {table.shape[0]} rows")
    out = table.data[ids]

    def backward(g):
        grad_table = np.zeros_like(table.data)
        np.add.at(grad_table, ids, g)
        return (grad_table,)

    return Tensor.from_op(out, (table,), backward, "embedding")


def cross_entropy(logits, targets) -> Tensor:
    """
    Per-position negative log-likelihood

    Args:
        logits: (..., V) unnormalized scores
        targets: integer array of shape logits.shape[:-1]

    Returns:
        Tensor of shape logits.shape[:-1]
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise ShapeError("cross_entropy", f"targets {targets.shape} vs logits {logits.shape}")
    peak = logits.data.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(logits.data - peak).sum(axis=-1, keepdims=True)) + peak
    log_probs = logits.data - log_norm
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    out = -picked

    def backward(g):
        grad = np.exp(log_probs)
        np.put_along_axis(
            grad,
            targets[..., None],
            np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0,
            axis=-1,
        )
        return (grad * g[..., None],)

    return Tensor.from_op(out, (logits,), backward, "cross_entropy")


# ============================================================================
# Structural ops
# ============================================================================

def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(tuple(shape))

    def backward(g):
        return (g.reshape(x.shape),)

    return Tensor.from_op(out, (x,), backward, "reshape")


def transpose(x, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    out = np.transpose(x.data, axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return Tensor.from_op(out, (x,), backward, "transpose")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, boundaries, axis=axis))

    return Tensor.from_op(out, tensors, backward, "concat")


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is Ellipsis or p is None for p in parts)


def index(x, key) -> Tensor:
    """x[key] with gradient scattered back (duplicates accumulate)"""
    x = as_tensor(x)
    out = x.data[key]
    basic = _is_basic_index(key)

    def backward(g):
        grad = np.zeros_like(x.data)
        if basic:
            grad[key] += g
        else:
            np.add.at(grad, key, g)
        return (grad,)

    return Tensor.from_op(np.array(out), (x,), backward, "index")


def sum(x, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return Tensor.from_op(out, (x,), backward, "sum")


# ============================================================================
# Composites
# ============================================================================

def sub(a, b) -> Tensor:
    return add(a, mul(b, -1.0))


def mean(x, axis: Axis = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def linear(x, weight, bias=None) -> Tensor:
    """x @ weight + bias over the last axis; weight is (in, out)"""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


def log_softmax(x, axis: int = -1) -> Tensor:
    return sub(x, logsumexp(x, axis=axis, keepdims=True))
