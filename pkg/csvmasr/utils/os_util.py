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
OS utilities for file and path management
"""

import hashlib
import os
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]

ROOT_ENV = "CSVMASR_ROOT"


def get_csvmasr_root_path() -> str:
    """
    Get the project root path

    Uses the CSVMASR_ROOT environment variable when it points to an
    existing directory, otherwise the current working directory.

    Returns:
        Project root path as string
    """
    env_root = os.environ.get(ROOT_ENV)
    if env_root and Path(env_root).exists():
        return str(Path(env_root).resolve())
    return str(Path.cwd())


def get_root_path(*paths: str) -> str:
    """
    Get path relative to the project root

    Example:
        get_root_path("runs", "run1")
        # Returns: "/path/to/project/runs/run1"
    """
    root_path = get_csvmasr_root_path()
    if paths:
        return os.path.join(root_path, *paths)
    return root_path


def resolve_path(path: PathLike) -> Path:
    """Absolute paths pass through; relative ones are anchored at the project root"""
    path = Path(path)
    if path.is_absolute():
        return path
    return Path(get_root_path()) / path


def ensure_dir(path: PathLike) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def sha256_file(path: PathLike, chunk_size: int = 1 << 20) -> str:
    """Content hash of a file, hex encoded"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()
