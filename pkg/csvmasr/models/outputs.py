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
Forward-pass, decoding and loss result models
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from csvmasr.models.corpus import Utterance
from csvmasr.models.routing import LidMask, RoutingRecord, stack_masks
from csvmasr.numerics import Tensor


@dataclass
class Batch:
    """
    Utterances of equal frame count stacked for one forward pass

    Attributes:
        features: (B, T, d_feat)
        masks: (B, L) boolean LID masks
        language_ids: (B,) ground-truth languages
        transcripts: Per-utterance gold token ids (no sos/eos)
    """
    features: np.ndarray
    masks: np.ndarray
    language_ids: np.ndarray
    transcripts: List[Tuple[int, ...]]
    utterance_ids: List[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_frames(self) -> int:
        return int(self.features.shape[1])

    @classmethod
    def from_utterances(cls, utterances: Sequence[Utterance], masks: Sequence[LidMask]) -> "Batch":
        frames = {u.num_frames for u in utterances}
        if len(frames) != 1:
            raise ValueError(f"Batch utterances must share a frame count, got {sorted(frames)}")
        return cls(
            features=np.stack([u.features for u in utterances]),
            masks=stack_masks(masks),
            language_ids=np.array([u.language_id for u in utterances], dtype=np.int64),
            transcripts=[tuple(u.transcript) for u in utterances],
            utterance_ids=[u.utterance_id for u in utterances],
        )


@dataclass
class LayerTrace:
    """Intermediate values of one Conformer layer, kept on request"""
    layer: int
    attention: np.ndarray       # (B, H, T+1, T+1)
    conv_input: np.ndarray      # (B, T+1, D)
    conv_output: np.ndarray     # (B, T+1, D)
    h0: np.ndarray              # (B, T+1, D)


@dataclass
class EncoderOutput:
    """
    Encoder result for a batch

    Attributes:
        frames: (B, T+1, d_model) with the summary-vector slot at row T
        sv_snapshots: One (B, d_model) tensor per adapter layer, the SV
            state entering that layer's classifier
        routing_records: One RoutingRecord per adapter layer
        traces: Per-layer traces when requested, else empty
    """
    frames: Tensor
    sv_snapshots: List[Tensor] = field(default_factory=list)
    routing_records: List[RoutingRecord] = field(default_factory=list)
    traces: List[LayerTrace] = field(default_factory=list)

    @property
    def num_rows(self) -> int:
        return int(self.frames.shape[-2])

    def language_logits(self) -> List[Tensor]:
        """Pre-mask classifier logits of every adapter layer that has a classifier"""
        return [r.logits for r in self.routing_records if r.logits is not None]


@dataclass
class Hypothesis:
    """Decoding hypothesis; tokens exclude the leading sos"""
    tokens: Tuple[int, ...]
    log_prob: float
    finished: bool = False

    def transcript(self, eos: int) -> Tuple[int, ...]:
        return self.tokens[:-1] if self.tokens and self.tokens[-1] == eos else self.tokens

    def normalized_score(self, length_normalize: bool = True) -> float:
        if not length_normalize:
            return self.log_prob
        return self.log_prob / max(len(self.tokens), 1)


@dataclass
class DecodeResult:
    """Result of autoregressive decoding for one utterance"""
    transcript: Tuple[int, ...]
    hypothesis: Hypothesis
    explored: List[Hypothesis] = field(default_factory=list)
    unfinished: bool = False  # True when no hypothesis reached eos within max_decode_len


@dataclass
class LossBreakdown:
    """
    Loss components and their combination

    total = (1 - lambda) * (beta * ctc + (1 - beta) * att) + lambda * lang
    """
    ctc: float
    att: float
    lang: float
    total: float
    total_tensor: Optional[Tensor] = None

    def as_row(self) -> dict:
        return {"ctc": self.ctc, "att": self.att, "lang": self.lang, "total": self.total}
