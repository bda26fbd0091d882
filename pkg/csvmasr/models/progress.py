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
Progress event models for long-running pipelines

Consumed by the CLI (and tests) through an optional progress callback.
"""

from dataclasses import dataclass
from typing import Optional


@dataclass
class ProgressEvent:
    """
    Structured progress event

    Attributes:
        event_type: Type of event (e.g., "generating_split", "epoch", "evaluating_prompt")
        progress: Progress value from 0.0 to 1.0
        current: Current item number (1-based epoch, mask, check..., optional)
        total: Total number of items (optional)
        extra_info: Free-form detail (e.g., "loss=0.8312")

    Examples:
        ProgressEvent(event_type="generating_split", progress=0.33, extra_info="train")

        ProgressEvent(event_type="epoch", progress=0.1, current=5, total=50)
    """
    event_type: str
    progress: float

    current: Optional[int] = None
    total: Optional[int] = None
    extra_info: Optional[str] = None

    def __post_init__(self):
        """Validate progress value"""
        if not 0.0 <= self.progress <= 1.0:
            raise ValueError(f"Progress must be between 0.0 and 1.0, got {self.progress}")
