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
Training pipeline

Loads the corpus, trains one variant, writes one checkpoint per epoch, the
averaged checkpoint, train_log.csv and manifest.json.
"""

from datetime import datetime
from pathlib import Path
from typing import Optional

from loguru import logger

from csvmasr.models.checkpoint import Checkpoint
from csvmasr.pipelines.base import BasePipeline, ProgressCallback
from csvmasr.services.persistence import PersistenceService
from csvmasr.services.trainer import Trainer, TrainingResult
from csvmasr.utils.os_util import PathLike


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:03d}.ckpt"


AVERAGED_CHECKPOINT = "avg.ckpt"


class TrainPipeline(BasePipeline):
    """
    Train a routing variant

    Output layout (under out_dir):
        epoch_001.ckpt ... epoch_NNN.ckpt, avg.ckpt, train_log.csv,
        manifest.json
    """

    def __call__(
        self,
        progress_callback: Optional[ProgressCallback] = None,
        corpus: PathLike = "data/corpus.jsonl",
        out_dir: PathLike = "runs/train",
        **kwargs,
    ) -> TrainingResult:
        created_at = datetime.now()
        corpus = Path(corpus)
        persistence = PersistenceService(out_dir)
        splits = PersistenceService.load_corpus(corpus)

        config = self.config
        epochs = config.train.epochs
        trainer = Trainer(config, splits, threads=config.runtime.threads)
        extra = {
            "config": config.to_dict(),
            "corpus": str(corpus),
            "corpus_config": splits.config.model_dump(mode="json"),
        }

        def on_checkpoint(checkpoint: Checkpoint):
            checkpoint.extra.update(extra)
            persistence.save_checkpoint(checkpoint, persistence.path(checkpoint_name(checkpoint.epoch)))
            self._report_progress(
                progress_callback, "epoch", checkpoint.epoch / epochs,
                current=checkpoint.epoch, total=epochs,
                extra_info=f"val_token_acc={checkpoint.val_token_acc:.4f}",
            )

        self._report_progress(progress_callback, "training", 0.0, total=epochs)
        result = trainer.train(on_checkpoint=on_checkpoint)

        result.averaged.extra.update(extra)
        persistence.save_checkpoint(result.averaged, persistence.path(AVERAGED_CHECKPOINT))
        persistence.write_train_log(result.logs)
        persistence.save_manifest("train", config.to_dict(), inputs=[corpus], created_at=created_at)
        logger.info(f"Training finished: {persistence.path(AVERAGED_CHECKPOINT)}")
        return result
