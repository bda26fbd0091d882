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
csvmasr data models
"""

from csvmasr.models.checkpoint import Checkpoint, EpochLog
from csvmasr.models.corpus import SPLITS, CorpusSplits, LanguageSpec, Utterance, Vocabulary
from csvmasr.models.outputs import (
    Batch,
    DecodeResult,
    EncoderOutput,
    Hypothesis,
    LayerTrace,
    LossBreakdown,
)
from csvmasr.models.progress import ProgressEvent
from csvmasr.models.reports import (
    AGGREGATE,
    LayerAccuracyReport,
    PromptSweepResult,
    RunManifest,
    SweepRow,
    TwoHotMatrix,
    WerReport,
)
from csvmasr.models.routing import (
    LidMask,
    Prompt,
    RoutingRecord,
    RoutingVariant,
    RoutingWeights,
    stack_masks,
)

__all__ = [
    "AGGREGATE",
    "SPLITS",
    "Batch",
    "Checkpoint",
    "CorpusSplits",
    "DecodeResult",
    "EncoderOutput",
    "EpochLog",
    "Hypothesis",
    "LanguageSpec",
    "LayerAccuracyReport",
    "LayerTrace",
    "LidMask",
    "LossBreakdown",
    "ProgressEvent",
    "Prompt",
    "PromptSweepResult",
    "RoutingRecord",
    "RoutingVariant",
    "RoutingWeights",
    "RunManifest",
    "SweepRow",
    "TwoHotMatrix",
    "Utterance",
    "Vocabulary",
    "WerReport",
    "stack_masks",
]
