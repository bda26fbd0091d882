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
Language routing over adapter experts

    h = h0 + sum_i alpha_i * h_i,   h_i = up_i(swish(down_i(h0)))

alpha comes from the LID mask alone (Uniform), from the summary vector
through a per-layer classifier (csv), or per frame from the same classifier
applied to every row (Framewise). Inactive languages always get an exact
zero weight.
"""

from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from csvmasr.config.schema import RoutingVariant
from csvmasr.errors import InvalidMaskError, ShapeError
from csvmasr.models.routing import LidMask, RoutingWeights
from csvmasr.numerics import Tensor, as_tensor, get_dtype, ops

MaskLike = Union[LidMask, np.ndarray]


def _mask_array(mask: MaskLike) -> np.ndarray:
    if isinstance(mask, LidMask):
        return mask.as_array()
    array = np.asarray(mask, dtype=bool)
    if array.shape[-1] == 0 or not np.all(array.any(axis=-1)):
        raise InvalidMaskError("every LID mask needs at least one active language")
    return array


def masked_softmax(logits, mask: MaskLike) -> RoutingWeights:
    """
    Softmax over active languages, exact zeros elsewhere

    Args:
        logits: (L,), (B, L) or framewise (B, T+1, L)
        mask: LidMask or boolean array broadcastable to logits

    Examples:
        masked_softmax([1, 2, 3], LidMask.from_bitstring("101"))
        # alpha == (0.11920, 0, 0.88080)
    """
    logits = as_tensor(logits)
    active = _mask_array(mask)
    if logits.ndim == 3 and active.ndim == 2:
        active = active[:, None, :]
    granularity = "frame" if logits.ndim == 3 else "utterance"
    return RoutingWeights(granularity, ops.masked_softmax(logits, active, axis=-1))


def uniform_alpha(mask: MaskLike) -> RoutingWeights:
    """alpha_i = m_i / popcount(m), fixed and parameter-free"""
    active = _mask_array(mask).astype(get_dtype())
    return RoutingWeights("utterance", Tensor(active / active.sum(axis=-1, keepdims=True)))


def adapter_forward(p: Mapping[str, Tensor], prefix: str, h0: Tensor) -> Tensor:
    """up(swish(down(h0))) with no internal residual"""
    down_weight = p[f"{prefix}.down.weight"]
    if h0.shape[-1] != down_weight.shape[0]:
        raise ShapeError("adapter_forward", f"h0 {h0.shape} vs down projection {down_weight.shape}")
    hidden = ops.swish(ops.linear(h0, down_weight, p[f"{prefix}.down.bias"]))
    return ops.linear(hidden, p[f"{prefix}.up.weight"], p[f"{prefix}.up.bias"])


def combine(h0: Tensor, experts: Sequence[Tensor], weights: RoutingWeights) -> Tensor:
    """
    Residual interpolation h = h0 + sum_i alpha_i h_i

    Args:
        h0: (B, S, D)
        experts: L tensors shaped like h0
        weights: utterance alpha (B, L) or framewise alpha (B, S, L)

    The weighted sum is one batched matmul of alpha against the stacked
    experts; zero weights contribute exact zeros.
    """
    if h0.ndim != 3:
        raise ShapeError("combine", f"h0 must be (B, S, D), got {h0.shape}")
    batch, steps, dim = h0.shape
    num_experts = len(experts)
    for expert in experts:
        if expert.shape != h0.shape:
            raise ShapeError("combine", f"expert {expert.shape} vs h0 {h0.shape}")

    alpha = weights.alpha
    if weights.granularity == "utterance":
        if alpha.shape != (batch, num_experts):
            raise ShapeError("combine", f"utterance alpha {alpha.shape} vs ({batch}, {num_experts})")
        alpha = ops.reshape(alpha, (batch, 1, 1, num_experts))
    elif weights.granularity == "frame":
        if alpha.shape != (batch, steps, num_experts):
            raise ShapeError("combine", f"framewise alpha {alpha.shape} vs ({batch}, {steps}, {num_experts})")
        alpha = ops.reshape(alpha, (batch, steps, 1, num_experts))
    else:
        raise ShapeError("combine", f"unknown granularity '{weights.granularity}'")

    stacked = ops.concat([ops.reshape(e, (batch, steps, 1, dim)) for e in experts], axis=2)
    mixed = ops.reshape(ops.matmul(alpha, stacked), (batch, steps, dim))
    return ops.add(h0, mixed)


def route(
    h0: Tensor,
    sv_state: Tensor,
    mask: MaskLike,
    variant: RoutingVariant,
    classifier: Optional[Tuple[Tensor, Tensor]] = None,
) -> Tuple[RoutingWeights, Optional[Tensor]]:
    """
    Interpolation weights for one adapter layer

    Returns:
        (weights, pre-mask language logits); logits are None for Uniform,
        (B, L) for csv and (B, T+1, L) for Framewise

    Raises:
        ValueError: If the variant has no adapters or a learnable variant
            gets no classifier
    """
    if variant == RoutingVariant.UNIFORM:
        return uniform_alpha(mask), None
    if not variant.uses_classifier:
        raise ValueError(f"variant '{variant.value}' does not route over adapters")
    if classifier is None:
        raise ValueError(f"variant '{variant.value}' requires a language classifier")

    weight, bias = classifier
    if variant == RoutingVariant.SUMMARY_VECTOR:
        logits = ops.linear(sv_state, weight, bias)
    else:
        logits = ops.linear(h0, weight, bias)
    return masked_softmax(logits, mask), logits


def lidconcat_augment(features: np.ndarray, mask: MaskLike) -> np.ndarray:
    """
    Append the LID mask to every frame

    Args:
        features: (T, d_feat) or (B, T, d_feat)
        mask: LidMask, (L,) or (B, L)

    Returns:
        Same leading shape with d_feat + L columns
    """
    features = np.asarray(features)
    active = _mask_array(mask).astype(features.dtype)
    if features.ndim == 2:
        if active.ndim != 1:
            raise ShapeError("lidconcat_augment", f"single utterance needs a single mask, got {active.shape}")
        tail = np.broadcast_to(active, features.shape[:-1] + active.shape)
    else:
        active = np.atleast_2d(active)
        tail = np.broadcast_to(active[:, None, :], features.shape[:-1] + active.shape[-1:])
    return np.concatenate([features, tail], axis=-1)
