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
Corpus generation pipeline (gen-data)
"""

from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger

from csvmasr.models.corpus import CorpusSplits
from csvmasr.pipelines.base import BasePipeline, ProgressCallback
from csvmasr.services.corpus import centroid_language_accuracy, generate_corpus
from csvmasr.services.persistence import PersistenceService
from csvmasr.utils.os_util import PathLike


class GenerateCorpusPipeline(BasePipeline):
    """
    Generate the synthetic corpus and write it as JSON-lines

    manifest.json goes next to the corpus file.
    """

    def __call__(
        self,
        progress_callback: Optional[ProgressCallback] = None,
        out: PathLike = "data/corpus.jsonl",
        **kwargs,
    ) -> CorpusSplits:
        created_at = datetime.now()
        corpus_config = self.config.corpus
        out = Path(out)
        self._report_progress(progress_callback, "generating_corpus", 0.0, extra_info=str(out))

        splits = generate_corpus(corpus_config, threads=self.config.runtime.threads)
        self._report_progress(progress_callback, "writing_corpus", 0.8)
        PersistenceService.save_corpus(splits, out)

        accuracy = centroid_language_accuracy(splits.train, splits.test)
        logger.info(
            f"Corpus written to {out}: {len(splits.train)} train / {len(splits.val)} val / "
            f"{len(splits.test)} test utterances, vocab {splits.vocabulary.size}, "
            f"centroid language accuracy {accuracy:.3f}"
        )

        PersistenceService(out.parent).save_manifest(
            "gen-data", self.config.to_dict(), created_at=created_at
        )
        self._report_progress(progress_callback, "completed", 1.0)
        return splits
