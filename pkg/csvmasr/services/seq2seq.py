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
Attention decoder and decoding

AR decoding is beam search over the attention decoder; NAR decoding is CTC
greedy collapse. Beam search works on any step function that maps a batch
of prefixes to next-token log-probabilities, so it can be driven by the
model or by a hand-built table.
"""

from typing import Callable, List, Mapping, Tuple

import numpy as np
from loguru import logger

from csvmasr.config.schema import BLANK_ID, EOS_ID, SOS_ID, ModelConfig
from csvmasr.errors import ShapeError
from csvmasr.models.outputs import DecodeResult, Hypothesis
from csvmasr.numerics import Tensor, ops
from csvmasr.services.encoder import feed_forward, multi_head_attention, norm

Params = Mapping[str, Tensor]
StepFn = Callable[[np.ndarray], np.ndarray]

# Tokens the attention decoder never emits
_NEVER_EMITTED = (BLANK_ID, SOS_ID)


def causal_mask(steps: int) -> np.ndarray:
    return np.tril(np.ones((steps, steps), dtype=bool))


def decoder_forward(
    p: Params,
    memory: Tensor,
    prefix: np.ndarray,
    config: ModelConfig,
) -> Tensor:
    """
    Next-token logits for every prefix position

    Args:
        p: Parameter tensors
        memory: Encoder frames (B or 1, T+1, D), SV row included
        prefix: (B, n) token ids starting with sos
        config: Model configuration

    Returns:
        (B, n, vocab_size) logits

    Raises:
        ShapeError: If the prefix is empty, lacks sos or exceeds max_decode_len
    """
    prefix = np.atleast_2d(np.asarray(prefix, dtype=np.int64))
    steps = prefix.shape[1]
    if steps == 0 or np.any(prefix[:, 0] != SOS_ID):
        raise ShapeError("decoder_forward", "prefix must be non-empty and start with sos")
    if steps > config.decoder.max_decode_len:
        raise ShapeError(
            "decoder_forward", f"prefix length {steps} exceeds max_decode_len {config.decoder.max_decode_len}"
        )

    heads = config.encoder.num_heads
    positions = ops.index(p["decoder.pos"], slice(0, steps))
    x = ops.add(ops.embedding(p["decoder.embed"], prefix), positions)
    mask = causal_mask(steps)
    for n in range(1, config.decoder.num_layers + 1):
        prefix_name = f"decoder.layers.{n}"
        attended, _ = multi_head_attention(
            p, f"{prefix_name}.self_attn", norm(p, f"{prefix_name}.self_attn.norm", x),
            num_heads=heads, mask=mask,
        )
        x = ops.add(x, attended)
        attended, _ = multi_head_attention(
            p, f"{prefix_name}.cross_attn", norm(p, f"{prefix_name}.cross_attn.norm", x),
            memory=memory, num_heads=heads,
        )
        x = ops.add(x, attended)
        x = ops.add(x, feed_forward(p, f"{prefix_name}.ff", x))
    x = norm(p, "decoder.final_norm", x)
    return ops.linear(x, p["decoder.out.weight"], p["decoder.out.bias"])


def cross_attention_weights(p: Params, memory: Tensor, prefix: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Cross-attention matrix of the first decoder layer, (B, H, n, T+1)"""
    prefix = np.atleast_2d(np.asarray(prefix, dtype=np.int64))
    steps = prefix.shape[1]
    x = ops.add(ops.embedding(p["decoder.embed"], prefix), ops.index(p["decoder.pos"], slice(0, steps)))
    attended, _ = multi_head_attention(
        p, "decoder.layers.1.self_attn", norm(p, "decoder.layers.1.self_attn.norm", x),
        num_heads=config.encoder.num_heads, mask=causal_mask(steps),
    )
    x = ops.add(x, attended)
    _, weights = multi_head_attention(
        p, "decoder.layers.1.cross_attn", norm(p, "decoder.layers.1.cross_attn.norm", x),
        memory=memory, num_heads=config.encoder.num_heads,
    )
    return weights.data


def _emittable(log_probs: np.ndarray) -> np.ndarray:
    scores = np.array(log_probs, dtype=np.float64)
    scores[..., list(_NEVER_EMITTED)] = -np.inf
    return scores


def _selection_key(hyp: Hypothesis, length_normalize: bool):
    # best first: higher score, then shorter, then lexicographically smaller
    return (-hyp.normalized_score(length_normalize), len(hyp.tokens), hyp.tokens)


def greedy_decode(step_fn: StepFn, max_decode_len: int, eos: int = EOS_ID) -> DecodeResult:
    """Argmax decoding; stops at eos or max_decode_len"""
    tokens: Tuple[int, ...] = ()
    log_prob = 0.0
    for _ in range(max_decode_len):
        scores = _emittable(step_fn(np.array([(SOS_ID,) + tokens]))[0])
        token = int(np.argmax(scores))
        log_prob += float(scores[token])
        tokens += (token,)
        if token == eos:
            break
    finished = bool(tokens) and tokens[-1] == eos
    hypothesis = Hypothesis(tokens, log_prob, finished=finished)
    return DecodeResult(hypothesis.transcript(eos), hypothesis, [hypothesis], unfinished=not finished)


def beam_search(
    step_fn: StepFn,
    width: int,
    max_decode_len: int,
    length_normalize: bool = True,
    eos: int = EOS_ID,
) -> DecodeResult:
    """
    Beam search over a next-token step function

    Every step expands each running hypothesis by every emittable token and
    keeps the `width` best expansions by raw log-probability. Expansions
    ending in eos move to the finished set. Decoding stops when nothing is
    running or at max_decode_len tokens.

    Args:
        step_fn: (W, n) prefixes starting with sos -> (W, V) log-probabilities
        width: Beam width >= 1
        max_decode_len: Maximum generated tokens, eos included
        length_normalize: Divide scores by hypothesis length at selection

    Returns:
        DecodeResult; `unfinished` is set when no hypothesis produced eos,
        in which case the best max-length hypothesis is returned
    """
    if width < 1:
        raise ValueError(f"beam width must be >= 1, got {width}")

    running: List[Hypothesis] = [Hypothesis((), 0.0)]
    finished: List[Hypothesis] = []
    capped: List[Hypothesis] = []
    for step in range(max_decode_len):
        prefixes = np.array([(SOS_ID,) + h.tokens for h in running], dtype=np.int64)
        scores = _emittable(step_fn(prefixes))

        candidates = []
        for row, hyp in enumerate(running):
            for token in np.flatnonzero(np.isfinite(scores[row])):
                candidates.append(Hypothesis(hyp.tokens + (int(token),), hyp.log_prob + float(scores[row, token])))
        candidates.sort(key=lambda h: _selection_key(h, False))

        running = []
        last_step = step == max_decode_len - 1
        for hyp in candidates[:width]:
            if hyp.tokens[-1] == eos:
                hyp.finished = True
                finished.append(hyp)
            elif last_step:
                hyp.finished = True
                capped.append(hyp)
            else:
                running.append(hyp)
        if not running:
            break

    explored = finished + capped
    if finished:
        best = min(finished, key=lambda h: _selection_key(h, length_normalize))
        return DecodeResult(best.transcript(eos), best, explored)

    best = min(capped, key=lambda h: _selection_key(h, length_normalize))
    logger.warning(f"Beam search found no eos within {max_decode_len} tokens; returning best unfinished hypothesis")
    return DecodeResult(best.transcript(eos), best, explored, unfinished=True)


def ctc_greedy(log_probs: np.ndarray, blank: int = BLANK_ID) -> Tuple[int, ...]:
    """
    Per-frame argmax, collapse consecutive repeats, drop blanks

    Examples:
        path (blank, a, a, blank, b) -> (a, b)
        path (a, blank, a)           -> (a, a)
    """
    log_probs = np.asarray(log_probs)
    if log_probs.ndim != 2:
        raise ShapeError("ctc_greedy", f"expected (frames, vocab), got {log_probs.shape}")
    path = log_probs.argmax(axis=-1)
    tokens = []
    previous = None
    for token in path:
        token = int(token)
        if token != previous and token != blank:
            tokens.append(token)
        previous = token
    return tuple(tokens)
