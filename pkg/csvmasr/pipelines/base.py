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
Base Pipeline

Every subcommand's workflow (gen-data, train, eval, sweep, gradcheck) is a
pipeline deriving from BasePipeline.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Optional

from loguru import logger

from csvmasr.models.progress import ProgressEvent

ProgressCallback = Callable[[ProgressEvent], None]


class BasePipeline(ABC):
    """
    Base pipeline

    Pipelines read the resolved configuration through self.core and report
    progress via progress_callback.

    Example:
        >>> class MyPipeline(BasePipeline):
        ...     def __call__(self, progress_callback=None, **kwargs):
        ...         self._report_progress(progress_callback, "started", 0.0)
        ...         model = self.core.load_model("runs/a/avg.ckpt")
        ...         ...
    """

    def __init__(self, csvmasr_core):
        """
        Args:
            csvmasr_core: CsvMasrCore instance (configuration and shared helpers)
        """
        self.core = csvmasr_core

    @property
    def config(self):
        return self.core.config

    @abstractmethod
    def __call__(self, progress_callback: Optional[ProgressCallback] = None, **kwargs) -> Any:
        """
        Execute the pipeline

        Args:
            progress_callback: Optional callback for progress updates (receives ProgressEvent)
            **kwargs: Pipeline-specific parameters
        """

    def _report_progress(
        self,
        callback: Optional[ProgressCallback],
        event_type: str,
        progress: float,
        current: Optional[int] = None,
        total: Optional[int] = None,
        extra_info: Optional[str] = None,
    ):
        """Emit a ProgressEvent to the callback (if any) and a debug line"""
        event = ProgressEvent(event_type, progress, current=current, total=total, extra_info=extra_info)
        if callback:
            callback(event)
        position = f" {current}/{total}" if current is not None and total is not None else ""
        detail = f" ({extra_info})" if extra_info else ""
        logger.debug(f"[{type(self).__name__}] {progress:.0%} {event_type}{position}{detail}")
