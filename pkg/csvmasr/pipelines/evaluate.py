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
Evaluation pipeline

WER under one prompt for the configured decode modes, per-adapter-layer
language classification accuracy (all-hot prompting) and, on request, the
2-hot prompting matrix. Reports are upserted so runs with different prompts
accumulate in the same files.
"""

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger

from csvmasr.models.reports import LayerAccuracyReport, TwoHotMatrix, WerReport
from csvmasr.models.routing import Prompt
from csvmasr.pipelines.base import BasePipeline, ProgressCallback
from csvmasr.services.evaluation import (
    decode_modes,
    evaluate_wer,
    layer_classification_accuracy,
    two_hot_matrix,
)
from csvmasr.services.persistence import (
    LCA_COLUMNS,
    TWO_HOT_COLUMNS,
    WER_COLUMNS,
    PersistenceService,
)
from csvmasr.utils.os_util import PathLike

LCA_PROMPT = "allhot"


@dataclass
class EvaluationResult:
    wer: WerReport
    layer_accuracy: Optional[LayerAccuracyReport] = None
    two_hot: Optional[list] = None  # one TwoHotMatrix per decode mode


class EvaluatePipeline(BasePipeline):
    """Evaluate a checkpoint on one corpus split"""

    def __call__(
        self,
        progress_callback: Optional[ProgressCallback] = None,
        checkpoint: PathLike = "runs/train/avg.ckpt",
        corpus: Optional[PathLike] = None,
        out_dir: Optional[PathLike] = None,
        two_hot: bool = False,
        **kwargs,
    ) -> EvaluationResult:
        created_at = datetime.now()
        eval_cfg = self.config.eval
        model, loaded = self.core.load_model(checkpoint)
        corpus = Path(corpus or loaded.extra["corpus"])
        out_dir = Path(out_dir) if out_dir else Path(checkpoint).parent / "eval"
        persistence = PersistenceService(out_dir)
        threads = self.config.runtime.threads

        utterances = PersistenceService.load_corpus(corpus).split(eval_cfg.split)
        prompt = Prompt.parse(eval_cfg.prompt)
        modes = decode_modes(eval_cfg.decode_mode)
        variant = model.config.variant.value
        logger.info(f"Evaluating {variant} on {len(utterances)} {eval_cfg.split} utterances, prompt {prompt}")

        self._report_progress(progress_callback, "decoding", 0.0, extra_info=str(prompt))
        report = evaluate_wer(model, utterances, prompt, modes, threads)
        persistence.merge_report(
            "wer_report.csv", WER_COLUMNS, report.rows(),
            key=("variant", "prompt", "decode_mode", "language"),
        )
        result = EvaluationResult(wer=report)

        if model.config.variant.uses_classifier and model.config.adapter_layers:
            self._report_progress(progress_callback, "classifying", 0.5)
            result.layer_accuracy = layer_classification_accuracy(
                model, utterances, Prompt.parse(LCA_PROMPT), threads
            )
            persistence.merge_report(
                "lca_report.csv", LCA_COLUMNS, result.layer_accuracy.rows(),
                key=("variant", "layer", "language"),
            )
        else:
            logger.info(f"Variant {variant} has no language classifiers; skipping lca_report.csv")

        if two_hot:
            self._report_progress(progress_callback, "two_hot", 0.7)
            result.two_hot = []
            for mode in modes:
                matrix: TwoHotMatrix = two_hot_matrix(model, utterances, mode, threads)
                result.two_hot.append(matrix)
                persistence.merge_report(
                    "two_hot.csv", TWO_HOT_COLUMNS, matrix.rows(),
                    key=("variant", "decode_mode", "prompted", "language"),
                )

        persistence.save_manifest(
            "eval", self.config.to_dict(), inputs=[checkpoint, corpus], created_at=created_at
        )
        self._report_progress(progress_callback, "completed", 1.0)
        return result
