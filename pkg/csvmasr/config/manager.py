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
Configuration Manager - Singleton pattern

Provides unified access to configuration with automatic validation.
"""
from pathlib import Path
from typing import Any, Optional

from loguru import logger

from .loader import load_config_dict, save_config_dict
from .schema import CsvMasrConfig


def deep_merge(base: dict, updates: dict) -> dict:
    """Recursively merge updates into base (in place) and return base"""
    for key, value in updates.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, dict):
            deep_merge(base[key], value)
        else:
            base[key] = value
    return base


class ConfigManager:
    """
    Configuration Manager (Singleton)

    The file is read lazily on first access to .config, so importing the
    package never touches the filesystem.
    """
    _instance: Optional['ConfigManager'] = None

    def __new__(cls, config_path: str = "config.yaml"):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self, config_path: str = "config.yaml"):
        # Only initialize once
        if hasattr(self, '_initialized'):
            return

        self.config_path = Path(config_path)
        self._config: Optional[CsvMasrConfig] = None
        self._initialized = True

    @property
    def config(self) -> CsvMasrConfig:
        if self._config is None:
            self._config = self._load()
        return self._config

    @config.setter
    def config(self, value: CsvMasrConfig):
        self._config = value

    def _load(self) -> CsvMasrConfig:
        """Load configuration from file"""
        data = load_config_dict(str(self.config_path))
        return CsvMasrConfig(**data)

    def use(self, config_path: str):
        """Point the manager at another file and load it"""
        self.config_path = Path(config_path)
        self.reload()

    def reload(self):
        """Reload configuration from file"""
        self._config = self._load()
        logger.info("Configuration reloaded")

    def save(self):
        """Save current configuration to file"""
        save_config_dict(self.config.to_dict(), str(self.config_path))

    def update(self, updates: dict):
        """
        Update configuration with new values

        Args:
            updates: Dictionary of updates (e.g., {"train": {"epochs": 10}})

        Raises:
            pydantic.ValidationError: If the merged configuration is invalid
        """
        merged = deep_merge(self.config.to_dict(), updates)
        self._config = CsvMasrConfig(**merged)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Section or dotted-path lookup on the resolved configuration

        Examples:
            get("train")          -> {"variant": "csv", ...}
            get("train.epochs")   -> 50
            get("loss.lambda")    -> 0.5
        """
        node: Any = self.config.to_dict()
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node
