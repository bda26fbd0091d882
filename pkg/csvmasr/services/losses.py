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
Training losses

    total = (1 - lambda) * (beta * ctc + (1 - beta) * att) + lambda * lang

CTC is a fused graph node: the forward pass is the log-space alpha
recursion, the backward pass returns minus the alpha-beta state posteriors
summed per vocabulary entry.
"""

import itertools
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from csvmasr.config.schema import BLANK_ID, LossConfig
from csvmasr.errors import CtcInfeasibleError, ShapeError
from csvmasr.models.outputs import LossBreakdown
from csvmasr.numerics import Tensor, as_tensor, ops

Scalar = Union[Tensor, float]


# ============================================================================
# CTC
# ============================================================================

def ctc_required_frames(target: Sequence[int]) -> int:
    """Minimum frame count: one per token plus a blank between equal neighbours"""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _extended(target: Sequence[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def _skip_allowed(ext: np.ndarray, blank: int) -> np.ndarray:
    """allowed[s]: state s may be entered from s - 2"""
    allowed = np.zeros(len(ext), dtype=bool)
    allowed[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return allowed


def ctc_forward_backward(
    log_probs: np.ndarray,
    target: Sequence[int],
    blank: int = BLANK_ID,
) -> Tuple[float, np.ndarray]:
    """
    Negative log-likelihood and its gradient w.r.t. log_probs

    Args:
        log_probs: (S, V) per-frame log-distributions
        target: Token ids without blanks

    Returns:
        (loss, grad) with grad of shape (S, V)

    Raises:
        CtcInfeasibleError: If the target needs more frames than available
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    target = [int(t) for t in target]
    frames = log_probs.shape[0]
    required = ctc_required_frames(target)
    if required > frames:
        raise CtcInfeasibleError(len(target), required, frames)

    ext = _extended(target, blank)
    states = len(ext)
    skip = _skip_allowed(ext, blank)
    emit = log_probs[:, ext]  # (S, states)

    alpha = np.full((frames, states), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, frames):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((frames, states), -np.inf)
    beta[-1, -1] = 0.0
    if states > 1:
        beta[-1, -2] = 0.0
    for t in range(frames - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    if states > 1:
        log_likelihood = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    else:
        log_likelihood = alpha[-1, -1]

    posteriors = np.exp(alpha + beta - log_likelihood)  # (S, states)
    grad = np.zeros_like(log_probs)
    for s, token in enumerate(ext):
        grad[:, token] -= posteriors[:, s]
    return float(-log_likelihood), grad


def ctc_loss(log_probs, target: Sequence[int], blank: int = BLANK_ID) -> Tensor:
    """
    CTC negative log-likelihood of one utterance as a graph node

    Examples:
        one frame, target (a,), P(a) = 0.6      -> -ln 0.6
        three uniform frames over {blank, a, b},
        target (a, b)                           -> -ln(5/27)
    """
    log_probs = as_tensor(log_probs)
    if log_probs.ndim != 2:
        raise ShapeError("ctc_loss", f"expected (frames, vocab), got {log_probs.shape}")
    loss, grad = ctc_forward_backward(log_probs.data, target, blank)

    def backward(g):
        return (grad * g,)

    return Tensor.from_op(np.array(loss), (log_probs,), backward, "ctc_loss")


def batch_ctc_loss(log_probs, targets: Sequence[Sequence[int]], blank: int = BLANK_ID) -> Tensor:
    """Per-utterance CTC loss, (B, S, V) -> (B,)"""
    log_probs = as_tensor(log_probs)
    if log_probs.ndim != 3 or log_probs.shape[0] != len(targets):
        raise ShapeError("ctc_loss", f"log_probs {log_probs.shape} vs {len(targets)} targets")
    results = [ctc_forward_backward(log_probs.data[b], targets[b], blank) for b in range(len(targets))]
    losses = np.array([loss for loss, _ in results])
    grads = np.stack([grad for _, grad in results])

    def backward(g):
        return (grads * g[:, None, None],)

    return Tensor.from_op(losses, (log_probs,), backward, "ctc_loss")


@lru_cache(maxsize=64)
def _enumerated_paths(frames: int, vocab: int, blank: int) -> Tuple[np.ndarray, Tuple[Tuple[int, ...], ...]]:
    paths = np.array(list(itertools.product(range(vocab), repeat=frames)), dtype=np.int64)
    collapsed = []
    for path in paths:
        tokens = []
        previous = None
        for token in path:
            token = int(token)
            if token != previous and token != blank:
                tokens.append(token)
            previous = token
        collapsed.append(tuple(tokens))
    return paths, tuple(collapsed)


def exhaustive_ctc_loss(log_probs: np.ndarray, target: Sequence[int], blank: int = BLANK_ID) -> float:
    """
    Reference CTC loss by enumerating every frame-level path

    Exponential in the frame count; only for small oracle checks.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    frames, vocab = log_probs.shape
    target = tuple(int(t) for t in target)
    paths, collapsed = _enumerated_paths(frames, vocab, blank)
    selected = [i for i, tokens in enumerate(collapsed) if tokens == target]
    if not selected:
        return float("inf")
    scores = log_probs[np.arange(frames), paths[selected]].sum(axis=1)
    return float(-np.logaddexp.reduce(scores))


# ============================================================================
# Attention and language losses
# ============================================================================

def attention_loss(logits, targets) -> Tensor:
    """
    Mean token cross-entropy under teacher forcing

    Args:
        logits: (B, n, V) decoder logits for the sos-shifted input
        targets: (B, n) gold tokens ending with eos
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise ShapeError("attention_loss", f"targets {targets.shape} vs logits {logits.shape}")
    return ops.mean(ops.cross_entropy(logits, targets))


def language_loss(layer_logits: List[Tensor], language_ids) -> Tensor:
    """
    Classifier cross-entropy averaged over adapter layers

    Utterance-level logits are (B, L); framewise logits (B, T+1, L) are
    additionally averaged over frames. Without any classifier the loss is 0.
    """
    language_ids = np.asarray(language_ids, dtype=np.int64)
    if not layer_logits:
        logger.warning("Language loss requested without adapter classifiers; using 0")
        return Tensor(0.0)

    per_layer = []
    for logits in layer_logits:
        if logits.ndim == 3:
            targets = np.broadcast_to(language_ids[:, None], logits.shape[:-1])
        else:
            targets = language_ids
        per_layer.append(ops.mean(ops.cross_entropy(logits, targets)))
    total = per_layer[0]
    for loss in per_layer[1:]:
        total = ops.add(total, loss)
    return ops.mul(total, 1.0 / len(per_layer))


def total_loss(ctc: Scalar, att: Scalar, lang: Scalar, config: LossConfig) -> LossBreakdown:
    """
    Weighted combination of the three components

    Examples:
        ctc=2, att=1, lang=0.6, lambda=0.5, beta=0.3 -> total 0.95
    """
    ctc, att, lang = as_tensor(ctc), as_tensor(att), as_tensor(lang)
    lam, beta = config.lambda_, config.beta
    asr = ops.add(ops.mul(ctc, beta), ops.mul(att, 1.0 - beta))
    total = ops.add(ops.mul(asr, 1.0 - lam), ops.mul(lang, lam))
    return LossBreakdown(
        ctc=ctc.item(),
        att=att.item(),
        lang=lang.item(),
        total=total.item(),
        total_tensor=total,
    )
