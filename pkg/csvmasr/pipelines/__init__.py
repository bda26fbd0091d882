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
csvmasr Pipelines

One pipeline per CLI subcommand.
"""

from csvmasr.pipelines.base import BasePipeline
from csvmasr.pipelines.evaluate import EvaluatePipeline, EvaluationResult
from csvmasr.pipelines.generate import GenerateCorpusPipeline
from csvmasr.pipelines.gradcheck import GradcheckPipeline
from csvmasr.pipelines.sweep import SweepPipeline
from csvmasr.pipelines.train import TrainPipeline

__all__ = [
    "BasePipeline",
    "EvaluatePipeline",
    "EvaluationResult",
    "GenerateCorpusPipeline",
    "GradcheckPipeline",
    "SweepPipeline",
    "TrainPipeline",
]
