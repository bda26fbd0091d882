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
Micro-Conformer encoder with a summary-vector slot

Hidden states are (B, T+1, D): T frame rows followed by the summary vector
(SV) row. The SV takes part in every attention op, skips every convolution,
and feeds the utterance-level language classifier at adapter layers.

Parameters are read from a name -> Tensor mapping with the layout

    encoder.input.{weight,bias}            (d_in, D), (D,)
    encoder.sv                             (D,)
    encoder.layers.{n}.ff1.*               half-step feed-forward
    encoder.layers.{n}.attn.*              MHSA + rel_bias (2C+2, H)
    encoder.layers.{n}.conv.*              pw1, dw, dw_norm, pw2, norm
    encoder.layers.{n}.ff2.*               half-step feed-forward
    encoder.layers.{n}.final_norm.*
    encoder.layers.{n}.adapters.{i}.*      adapter layers only
    encoder.layers.{n}.classifier.*        adapter layers, learnable routing only

with n 1-based.
"""

from typing import Callable, List, Mapping, Optional, Tuple

import numpy as np

from csvmasr.config.schema import ModelConfig, RoutingVariant
from csvmasr.errors import EmptyUtteranceError, ShapeError
from csvmasr.models.outputs import EncoderOutput, LayerTrace
from csvmasr.models.routing import RoutingRecord
from csvmasr.numerics import Tensor, ops
from csvmasr.services import routing

Params = Mapping[str, Tensor]
AdapterHook = Callable[[Tensor], Tensor]


# ============================================================================
# Shared building blocks (also used by the decoder)
# ============================================================================

def norm(p: Params, prefix: str, x: Tensor) -> Tensor:
    return ops.layer_norm(x, p[f"{prefix}.gamma"], p[f"{prefix}.beta"])


def feed_forward(p: Params, prefix: str, x: Tensor) -> Tensor:
    """Pre-norm position-wise feed-forward (no residual)"""
    hidden = ops.swish(ops.linear(norm(p, f"{prefix}.norm", x), p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
    return ops.linear(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"])


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    batch, steps, dim = x.shape
    return ops.transpose(ops.reshape(x, (batch, steps, num_heads, dim // num_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    batch, heads, steps, head_dim = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1, 3)), (batch, steps, heads * head_dim))


def multi_head_attention(
    p: Params,
    prefix: str,
    query: Tensor,
    memory: Optional[Tensor] = None,
    num_heads: int = 1,
    bias: Optional[Tensor] = None,
    mask: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Scaled dot-product attention over num_heads heads

    Args:
        query: (B, Sq, D), already normalized
        memory: (B or 1, Sk, D) keys/values; None means self-attention
        bias: Additive score bias broadcastable to (B, H, Sq, Sk)
        mask: Boolean (Sq, Sk) of allowed positions

    Returns:
        (output (B, Sq, D), attention weights (B, H, Sq, Sk))
    """
    memory = query if memory is None else memory
    dim = query.shape[-1]
    if dim % num_heads:
        raise ShapeError("attention", f"d_model {dim} not divisible by {num_heads} heads")
    q = _split_heads(ops.linear(query, p[f"{prefix}.wq"], p[f"{prefix}.bq"]), num_heads)
    k = _split_heads(ops.linear(memory, p[f"{prefix}.wk"], p[f"{prefix}.bk"]), num_heads)
    v = _split_heads(ops.linear(memory, p[f"{prefix}.wv"], p[f"{prefix}.bv"]), num_heads)

    scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dim // num_heads))
    if bias is not None:
        scores = ops.add(scores, bias)
    weights = ops.masked_softmax(scores, mask, axis=-1)
    context = _merge_heads(ops.matmul(weights, v))
    return ops.linear(context, p[f"{prefix}.wo"], p[f"{prefix}.bo"]), weights


# ============================================================================
# Encoder pieces
# ============================================================================

def append_summary(projected: Tensor, theta_sv: Tensor) -> Tensor:
    """
    Append the summary vector as row T

    Args:
        projected: (B, T, D) projected features
        theta_sv: (D,)

    Returns:
        (B, T+1, D); row T is an exact copy of theta_sv

    Raises:
        EmptyUtteranceError: If T == 0
    """
    if projected.ndim != 3:
        raise ShapeError("append_summary", f"expected (B, T, D), got {projected.shape}")
    batch, steps, dim = projected.shape
    if steps == 0:
        raise EmptyUtteranceError("cannot append a summary vector to an utterance with no frames")
    # a gather copies the row bit-for-bit into every batch entry
    sv_rows = ops.embedding(ops.reshape(theta_sv, (1, dim)), np.zeros((batch, 1), dtype=np.int64))
    return ops.concat([projected, sv_rows], axis=1)


def relative_position_buckets(num_frames: int, clip: int) -> np.ndarray:
    """
    (T+1, T+1) integer bucket per (query, key) pair

    Frame pairs map to clip(j - i, -C, C) + C in 0..2C. Any pair involving
    the SV row (index T) uses the reserved bucket 2C + 1.
    """
    positions = np.arange(num_frames)
    buckets = np.full((num_frames + 1, num_frames + 1), 2 * clip + 1, dtype=np.int64)
    buckets[:num_frames, :num_frames] = (
        np.clip(positions[None, :] - positions[:, None], -clip, clip) + clip
    )
    return buckets


def relative_bias(table: Tensor, buckets: np.ndarray) -> Tensor:
    """Gather the learned (2C+2, H) table into an (H, S, S) score bias"""
    return ops.transpose(ops.embedding(table, buckets), (2, 0, 1))


def convolution_module(p: Params, prefix: str, x: Tensor) -> Tensor:
    """
    Conformer convolution block with residual, applied to frame rows only

    LN -> pointwise (D -> 2D) -> GLU -> depthwise conv -> LN -> swish ->
    pointwise (D -> D). The SV row (last) is passed through untouched.
    """
    steps = x.shape[1] - 1
    frames = ops.index(x, (slice(None), slice(0, steps)))
    sv_row = ops.index(x, (slice(None), slice(steps, steps + 1)))

    y = norm(p, f"{prefix}.norm", frames)
    y = ops.glu(ops.linear(y, p[f"{prefix}.pw1.weight"], p[f"{prefix}.pw1.bias"]), axis=-1)
    y = ops.depthwise_conv1d(y, p[f"{prefix}.dw.weight"], p[f"{prefix}.dw.bias"])
    y = ops.swish(norm(p, f"{prefix}.dw_norm", y))
    y = ops.linear(y, p[f"{prefix}.pw2.weight"], p[f"{prefix}.pw2.bias"])
    return ops.concat([ops.add(frames, y), sv_row], axis=1)


def conformer_layer(
    p: Params,
    prefix: str,
    x: Tensor,
    num_heads: int,
    rel_pos_clip: int,
    adapter_hook: Optional[AdapterHook] = None,
    trace: Optional[List[LayerTrace]] = None,
    layer: int = 0,
) -> Tensor:
    """
    One macaron Conformer layer on (B, T+1, D)

    Order: 0.5 * FF1 -> MHSA with relative bias -> convolution module ->
    0.5 * FF2 (giving h0) -> adapter hook -> final layer norm.
    """
    if x.ndim != 3 or x.shape[-1] != p[f"{prefix}.final_norm.gamma"].shape[0]:
        raise ShapeError("conformer_layer", f"input {x.shape} does not match layer '{prefix}'")

    x = ops.add(x, ops.mul(feed_forward(p, f"{prefix}.ff1", x), 0.5))

    buckets = relative_position_buckets(x.shape[1] - 1, rel_pos_clip)
    attended, attention = multi_head_attention(
        p,
        f"{prefix}.attn",
        norm(p, f"{prefix}.attn.norm", x),
        num_heads=num_heads,
        bias=relative_bias(p[f"{prefix}.attn.rel_bias"], buckets),
    )
    x = ops.add(x, attended)

    conv_input = x
    x = convolution_module(p, f"{prefix}.conv", x)

    h0 = ops.add(x, ops.mul(feed_forward(p, f"{prefix}.ff2", x), 0.5))
    h = adapter_hook(h0) if adapter_hook is not None else h0
    out = norm(p, f"{prefix}.final_norm", h)

    if trace is not None:
        trace.append(LayerTrace(
            layer=layer,
            attention=attention.data,
            conv_input=conv_input.data,
            conv_output=x.data,
            h0=h0.data,
        ))
    return out


def _adapter_hook(
    p: Params,
    prefix: str,
    config: ModelConfig,
    masks: np.ndarray,
    layer: int,
    records: List[RoutingRecord],
    snapshots: List[Tensor],
) -> AdapterHook:
    def hook(h0: Tensor) -> Tensor:
        steps = h0.shape[1] - 1
        sv_state = ops.index(h0, (slice(None), steps))
        snapshots.append(sv_state)
        experts = [
            routing.adapter_forward(p, f"{prefix}.adapters.{i}", h0)
            for i in range(config.num_languages)
        ]
        classifier = None
        if config.variant.uses_classifier:
            classifier = (p[f"{prefix}.classifier.weight"], p[f"{prefix}.classifier.bias"])
        weights, logits = routing.route(h0, sv_state, masks, config.variant, classifier)
        records.append(RoutingRecord(layer=layer, weights=weights, logits=logits))
        return routing.combine(h0, experts, weights)

    return hook


def encode(
    p: Params,
    features: np.ndarray,
    masks: np.ndarray,
    config: ModelConfig,
    trace: bool = False,
) -> EncoderOutput:
    """
    Run the full encoder on a batch of equal-length utterances

    Args:
        p: Parameter tensors
        features: (B, T, d_feat)
        masks: (B, L) boolean LID masks, at least one bit per row
        config: Model configuration (variant decides adapters/LIDConcat)
        trace: Keep per-layer attention and convolution traces

    Returns:
        EncoderOutput with (B, T+1, D) frames, one SV snapshot and one
        routing record per adapter layer
    """
    features = np.asarray(features)
    if features.ndim == 2:
        features = features[None]
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    if features.shape[1] == 0:
        raise EmptyUtteranceError("cannot encode an utterance with no frames")

    if config.variant == RoutingVariant.LIDCONCAT:
        features = routing.lidconcat_augment(features, masks)

    x = ops.linear(Tensor(features), p["encoder.input.weight"], p["encoder.input.bias"])
    x = append_summary(x, p["encoder.sv"])

    output = EncoderOutput(frames=x)
    traces: Optional[List[LayerTrace]] = [] if trace else None
    adapter_layers = set(config.adapter_layers)
    for n in range(1, config.encoder.num_layers + 1):
        prefix = f"encoder.layers.{n}"
        hook = None
        if n in adapter_layers:
            hook = _adapter_hook(
                p, prefix, config, masks, n, output.routing_records, output.sv_snapshots
            )
        x = conformer_layer(
            p, prefix, x, config.encoder.num_heads, config.encoder.rel_pos_clip, hook, traces, n
        )

    output.frames = x
    output.traces = traces or []
    return output
