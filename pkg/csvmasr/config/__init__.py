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
csvmasr Configuration System

Unified configuration management with Pydantic validation.

Usage:
    from csvmasr.config import config_manager

    # Access config (type-safe)
    epochs = config_manager.config.train.epochs

    # Update config
    config_manager.update({"train": {"epochs": 10}})
    config_manager.save()
"""
from .loader import load_config_dict, save_config_dict
from .manager import ConfigManager, deep_merge
from .schema import (
    BLANK_ID,
    EOS_ID,
    NUM_RESERVED_TOKENS,
    SOS_ID,
    AdapterConfig,
    CorpusConfig,
    CsvMasrConfig,
    DecoderConfig,
    EncoderConfig,
    EvalConfig,
    LossConfig,
    ModelConfig,
    RoutingVariant,
    RuntimeConfig,
    TrainConfig,
)

# Global singleton instance
config_manager = ConfigManager()

__all__ = [
    "BLANK_ID",
    "SOS_ID",
    "EOS_ID",
    "NUM_RESERVED_TOKENS",
    "AdapterConfig",
    "CorpusConfig",
    "CsvMasrConfig",
    "DecoderConfig",
    "EncoderConfig",
    "EvalConfig",
    "LossConfig",
    "ModelConfig",
    "RoutingVariant",
    "RuntimeConfig",
    "TrainConfig",
    "ConfigManager",
    "config_manager",
    "deep_merge",
    "load_config_dict",
    "save_config_dict",
]
