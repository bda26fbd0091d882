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
Synthetic corpus data models
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from csvmasr.config.schema import BLANK_ID, EOS_ID, NUM_RESERVED_TOKENS, SOS_ID, CorpusConfig

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class Vocabulary:
    """
    Global token inventory

    Ids 0..2 are blank, sos and eos; language l owns the contiguous range
    [3 + l*V, 3 + (l+1)*V).
    """
    num_languages: int
    tokens_per_language: int

    blank: int = BLANK_ID
    sos: int = SOS_ID
    eos: int = EOS_ID

    @property
    def size(self) -> int:
        return NUM_RESERVED_TOKENS + self.num_languages * self.tokens_per_language

    def token_range(self, language_id: int) -> range:
        start = NUM_RESERVED_TOKENS + language_id * self.tokens_per_language
        return range(start, start + self.tokens_per_language)

    def language_of(self, token_id: int) -> int:
        """Owning language of a content token (-1 for reserved ids)"""
        if token_id < NUM_RESERVED_TOKENS or token_id >= self.size:
            return -1
        return (token_id - NUM_RESERVED_TOKENS) // self.tokens_per_language

    def to_map(self) -> Dict[str, int]:
        """Token name -> id, e.g. {"<blank>": 0, ..., "L0_T0": 3}"""
        mapping = {"<blank>": self.blank, "<sos>": self.sos, "<eos>": self.eos}
        for language_id in range(self.num_languages):
            for offset, token_id in enumerate(self.token_range(language_id)):
                mapping[f"L{language_id}_T{offset}"] = token_id
        return mapping


@dataclass(frozen=True)
class LanguageSpec:
    """Generative description of one synthetic language"""
    language_id: int
    token_ids: range
    channel_bias: np.ndarray        # (d_feat,)
    token_prototypes: np.ndarray    # (V, k, d_feat)

    def prototype_for(self, token_id: int) -> np.ndarray:
        return self.token_prototypes[token_id - self.token_ids.start]


@dataclass
class Utterance:
    """One synthetic utterance"""
    utterance_id: str
    language_id: int
    transcript: Tuple[int, ...]
    features: np.ndarray            # (T, d_feat)

    @property
    def num_frames(self) -> int:
        return int(self.features.shape[0])


@dataclass
class CorpusSplits:
    """Train/val/test utterance lists plus the generating config"""
    config: CorpusConfig
    vocabulary: Vocabulary
    train: List[Utterance] = field(default_factory=list)
    val: List[Utterance] = field(default_factory=list)
    test: List[Utterance] = field(default_factory=list)

    def split(self, name: str) -> List[Utterance]:
        if name not in SPLITS:
            raise ValueError(f"Unknown split '{name}', expected one of {SPLITS}")
        return getattr(self, name)

    def by_language(self, name: str, language_id: int) -> List[Utterance]:
        return [u for u in self.split(name) if u.language_id == language_id]

    def restricted_to(self, languages: List[int]) -> "CorpusSplits":
        """Copy keeping only utterances of the listed languages"""
        keep = set(languages)
        return CorpusSplits(
            config=self.config,
            vocabulary=self.vocabulary,
            train=[u for u in self.train if u.language_id in keep],
            val=[u for u in self.val if u.language_id in keep],
            test=[u for u in self.test if u.language_id in keep],
        )
