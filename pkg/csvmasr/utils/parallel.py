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
Thread-pool helpers

Results always come back in input order, so a run with N workers reduces
exactly like a single-threaded one.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CSVMASR_THREADS"


def resolve_threads(threads: Optional[int] = None, default: int = 1) -> int:
    """
    Worker count: explicit value, then CSVMASR_THREADS, then default

    Raises:
        ValueError: If the resolved count is not a positive integer
    """
    if threads is None:
        env_value = os.environ.get(THREADS_ENV)
        if env_value:
            try:
                threads = int(env_value)
            except ValueError:
                raise ValueError(f"{THREADS_ENV} must be an integer, got '{env_value}'")
        else:
            threads = default
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Apply fn to every item, results in input order

    With threads == 1 no pool is created.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    logger.debug(f"Mapping {len(items)} items over {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
