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
Evaluation report models

Each report flattens into the CSV rows written by PersistenceService.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

AGGREGATE = "all"


@dataclass
class WerReport:
    """
    AR/NAR WER per language plus the aggregate

    The aggregate (language "all") is total edits over total reference
    tokens, not the mean of per-language WERs.

    Attributes:
        variant: Routing variant name
        prompt: Prompt descriptor ("1hot", "allhot", "mask=101", ...)
        wer: {decode_mode: {language: wer}} with language as a string id
            or "all"
    """
    variant: str
    prompt: str
    wer: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def aggregate(self, decode_mode: str) -> float:
        return self.wer[decode_mode][AGGREGATE]

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"variant": self.variant, "prompt": self.prompt, "decode_mode": mode,
             "language": language, "wer": value}
            for mode, per_language in self.wer.items()
            for language, value in per_language.items()
        ]


@dataclass
class LayerAccuracyReport:
    """Per-adapter-layer language classification accuracy (percent)"""
    variant: str
    accuracy: Dict[int, Dict[str, float]] = field(default_factory=dict)  # layer -> language -> %

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"variant": self.variant, "layer": layer, "language": language, "accuracy": value}
            for layer, per_language in self.accuracy.items()
            for language, value in per_language.items()
        ]

    def last_layer(self) -> Dict[str, float]:
        return self.accuracy[max(self.accuracy)]


@dataclass
class SweepRow:
    num_additional: int
    num_masks: int
    mean_wer: float
    ci95: float


@dataclass
class PromptSweepResult:
    """
    WER against the number of additional LID bits for one language

    Row k covers all C(L-1, k) masks that contain the ground truth.
    """
    variant: str
    language: int
    decode_mode: str
    rows: List[SweepRow] = field(default_factory=list)
    mask_wer: Dict[str, float] = field(default_factory=dict)  # bitstring -> WER

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [
            {"variant": self.variant, "language": self.language, "k": row.num_additional,
             "mean_wer": row.mean_wer, "ci95": row.ci95}
            for row in self.rows
        ]


@dataclass
class TwoHotMatrix:
    """
    WER of ground-truth language j prompted with {i, j}

    The diagonal holds the 1-hot WER.
    """
    variant: str
    decode_mode: str
    entries: Dict[int, Dict[int, float]] = field(default_factory=dict)  # prompted i -> language j -> wer

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {"variant": self.variant, "decode_mode": self.decode_mode, "prompted": i,
             "language": j, "wer": value}
            for i, per_language in self.entries.items()
            for j, value in per_language.items()
        ]


class RunManifest(BaseModel):
    """
    One per output directory

    Attributes:
        command: Subcommand that produced the directory
        config: Fully resolved configuration
        inputs: Input file path -> sha256 content hash
        tool_version: csvmasr version string
        created_at / completed_at: ISO timestamps (the only timestamps written)
    """
    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = Field(default_factory=dict)
    tool_version: str
    created_at: str
    completed_at: Optional[str] = None
