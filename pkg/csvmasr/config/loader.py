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
YAML configuration files

The file holds one mapping per schema section (corpus, encoder, adapters,
decoder, loss, train, eval, runtime). Unknown sections are left for pydantic
to reject.
"""
from pathlib import Path
from typing import Union

import yaml
from loguru import logger

PathLike = Union[str, Path]


def load_config_dict(config_path: PathLike = "config.yaml") -> dict:
    """
    Read a configuration file into a plain dict

    A missing file yields {} so the schema defaults apply.

    Raises:
        yaml.YAMLError: If the file is not valid YAML
        ValueError: If the top level is not a mapping
    """
    path = Path(config_path)
    if not path.exists():
        logger.warning(f"Config file not found: {path}; using schema defaults")
        return {}

    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of config sections, got {type(data).__name__}")
    logger.info(f"Configuration loaded from {path} (sections: {', '.join(sorted(data)) or 'none'})")
    return data


def save_config_dict(config: dict, config_path: PathLike = "config.yaml"):
    """Write a configuration dict as block-style YAML, keys in schema order"""
    path = Path(config_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(config, f, allow_unicode=True, default_flow_style=False, sort_keys=False)
    except OSError as e:
        logger.error(f"Failed to save config {path}: {e}")
        raise
    logger.info(f"Configuration saved to {path}")
