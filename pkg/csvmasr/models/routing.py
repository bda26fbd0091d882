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
Language masks, prompts and routing weights
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from csvmasr.config.schema import RoutingVariant
from csvmasr.errors import InvalidMaskError
from csvmasr.numerics import Tensor

__all__ = ["LidMask", "Prompt", "RoutingRecord", "RoutingVariant", "RoutingWeights", "stack_masks"]


@dataclass(frozen=True)
class LidMask:
    """
    Binary presence vector over L languages (at least one bit set)

    Examples:
        LidMask.one_hot(0, 3)          # (1, 0, 0)
        LidMask.all_hot(3)             # (1, 1, 1)
        LidMask.from_bitstring("011")  # (0, 1, 1)
    """
    bits: Tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise InvalidMaskError(f"mask entries must be 0 or 1, got {self.bits}")
        if not any(self.bits):
            raise InvalidMaskError("mask has no active language")

    @classmethod
    def one_hot(cls, language_id: int, num_languages: int) -> "LidMask":
        return cls.from_active([language_id], num_languages)

    @classmethod
    def all_hot(cls, num_languages: int) -> "LidMask":
        return cls(tuple([1] * num_languages))

    @classmethod
    def from_active(cls, active: Iterable[int], num_languages: int) -> "LidMask":
        bits = [0] * num_languages
        for language_id in active:
            if not 0 <= language_id < num_languages:
                raise InvalidMaskError(f"language {language_id} outside 0..{num_languages - 1}")
            bits[language_id] = 1
        return cls(tuple(bits))

    @classmethod
    def from_bitstring(cls, text: str) -> "LidMask":
        if not text or any(c not in "01" for c in text):
            raise InvalidMaskError(f"mask bitstring must contain only 0/1, got '{text}'")
        return cls(tuple(int(c) for c in text))

    @property
    def num_languages(self) -> int:
        return len(self.bits)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def contains(self, language_id: int) -> bool:
        return bool(self.bits[language_id])

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def to_bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)


def stack_masks(masks: Sequence[LidMask]) -> np.ndarray:
    """(B, L) boolean array from a batch of masks"""
    return np.stack([m.as_array() for m in masks])


@dataclass(frozen=True)
class Prompt:
    """
    Inference-time prompt

    Syntax: "1hot" (ground truth only), "allhot", "nogt" (every language
    except the ground truth) or "mask=<bits>" (explicit mask).
    """
    kind: str
    mask: Optional[LidMask] = None

    KINDS = ("1hot", "allhot", "nogt", "mask")

    @classmethod
    def parse(cls, text: str) -> "Prompt":
        text = text.strip()
        if text.startswith("mask="):
            return cls("mask", LidMask.from_bitstring(text[len("mask="):]))
        if text in ("1hot", "allhot", "nogt"):
            return cls(text)
        raise ValueError(f"Unknown prompt '{text}', expected 1hot, allhot, nogt or mask=<bits>")

    def mask_for(self, language_id: int, num_languages: int) -> LidMask:
        """Resolve the prompt for an utterance of the given ground-truth language"""
        if self.kind == "1hot":
            return LidMask.one_hot(language_id, num_languages)
        if self.kind == "allhot":
            return LidMask.all_hot(num_languages)
        if self.kind == "nogt":
            return LidMask.from_active(
                [i for i in range(num_languages) if i != language_id], num_languages
            )
        if self.mask.num_languages != num_languages:
            raise InvalidMaskError(
                f"mask has {self.mask.num_languages} entries, model has {num_languages} languages"
            )
        return self.mask

    def __str__(self) -> str:
        return f"mask={self.mask.to_bitstring()}" if self.kind == "mask" else self.kind


@dataclass
class RoutingWeights:
    """
    Interpolation weights alpha over the L experts

    alpha has shape (B, L) for utterance-level granularity and (B, T+1, L)
    for framewise granularity. Inactive entries are exactly zero.
    """
    granularity: str  # "utterance" | "frame"
    alpha: Tensor

    @property
    def values(self) -> np.ndarray:
        return self.alpha.data


@dataclass
class RoutingRecord:
    """Routing decision taken at one adapter layer"""
    layer: int
    weights: RoutingWeights
    logits: Optional[Tensor] = None  # unmasked classifier output, None for Uniform
