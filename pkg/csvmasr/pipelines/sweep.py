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
Prompt sweep pipeline

For each language of the evaluated split, WER against the number of
additional prompted languages; writes sweep.csv and optionally sweep.svg.
"""

from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

from loguru import logger

from csvmasr.models.reports import PromptSweepResult
from csvmasr.pipelines.base import BasePipeline, ProgressCallback
from csvmasr.services.charts import write_sweep_svg
from csvmasr.services.evaluation import prompt_sweep
from csvmasr.services.persistence import SWEEP_COLUMNS, PersistenceService
from csvmasr.utils.os_util import PathLike


class SweepPipeline(BasePipeline):
    """Run prompt_sweep for every (or the selected) language"""

    def __call__(
        self,
        progress_callback: Optional[ProgressCallback] = None,
        checkpoint: PathLike = "runs/train/avg.ckpt",
        corpus: Optional[PathLike] = None,
        out_dir: Optional[PathLike] = None,
        decode_mode: str = "nar",
        languages: Optional[Sequence[int]] = None,
        **kwargs,
    ) -> List[PromptSweepResult]:
        created_at = datetime.now()
        model, loaded = self.core.load_model(checkpoint)
        corpus = Path(corpus or loaded.extra["corpus"])
        out_dir = Path(out_dir) if out_dir else Path(checkpoint).parent / "sweep"
        persistence = PersistenceService(out_dir)
        eval_cfg = self.config.eval

        splits = PersistenceService.load_corpus(corpus)
        utterances = splits.split(eval_cfg.split)
        if languages is None:
            languages = sorted({u.language_id for u in utterances})

        results = []
        for index, language in enumerate(languages):
            subset = [u for u in utterances if u.language_id == language]
            if not subset:
                logger.warning(f"No {eval_cfg.split} utterances for language {language}; skipped")
                continue
            self._report_progress(
                progress_callback, "sweeping_language", index / len(languages),
                current=index + 1, total=len(languages),
            )
            result = prompt_sweep(model, subset, decode_mode, self.config.runtime.threads)
            results.append(result)
            summary = ", ".join(f"k={r.num_additional}: {r.mean_wer:.2f}" for r in result.rows)
            logger.info(f"Sweep language {language} ({decode_mode}): {summary}")

        persistence.merge_report(
            "sweep.csv", SWEEP_COLUMNS,
            [row for result in results for row in result.csv_rows()],
            key=("variant", "language", "k"),
        )
        if eval_cfg.write_svg:
            write_sweep_svg(results, persistence.path("sweep.svg"))

        persistence.save_manifest(
            "sweep", self.config.to_dict(), inputs=[checkpoint, corpus], created_at=created_at
        )
        self._report_progress(progress_callback, "completed", 1.0)
        return results
