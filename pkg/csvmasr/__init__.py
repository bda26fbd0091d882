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
csvmasr - configurable multilingual ASR with summary-vector-routed adapters

Usage:
    from csvmasr import CsvMasrCore

    core = CsvMasrCore()
    core.run("gen-data", out="data/corpus.jsonl")
    result = core.run("train", corpus="data/corpus.jsonl", out_dir="runs/csv")
"""

__version__ = "0.1.0"

from csvmasr.config import config_manager  # noqa: E402
from csvmasr.service import CsvMasrCore  # noqa: E402

__all__ = ["CsvMasrCore", "config_manager", "__version__"]
