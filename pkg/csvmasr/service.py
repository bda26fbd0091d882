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
csvmasr Core - Service Layer

Provides unified access to the configuration, model loading and the
pipelines behind every CLI subcommand.
"""

from pathlib import Path
from typing import Dict, Optional, Tuple

from loguru import logger

from csvmasr.config import config_manager
from csvmasr.config.schema import CorpusConfig, CsvMasrConfig
from csvmasr.models.checkpoint import Checkpoint
from csvmasr.pipelines.base import BasePipeline
from csvmasr.pipelines.evaluate import EvaluatePipeline
from csvmasr.pipelines.generate import GenerateCorpusPipeline
from csvmasr.pipelines.gradcheck import GradcheckPipeline
from csvmasr.pipelines.sweep import SweepPipeline
from csvmasr.pipelines.train import TrainPipeline
from csvmasr.services.model import CsvMasrModel
from csvmasr.services.persistence import PersistenceService
from csvmasr.utils.os_util import PathLike


class CsvMasrCore:
    """
    csvmasr Core - Service Layer

    Usage:
        from csvmasr import CsvMasrCore

        core = CsvMasrCore()
        core.run("gen-data", out="data/corpus.jsonl")
        core.run("train", corpus="data/corpus.jsonl", out_dir="runs/csv")
        result = core.run("eval", checkpoint="runs/csv/avg.ckpt")

    Architecture:
        CsvMasrCore (this class)
          ├── config (resolved CsvMasrConfig)
          └── pipelines
              ├── gen-data (synthetic corpus)
              ├── train (training + checkpoint averaging)
              ├── eval (WER, layer accuracy, 2-hot matrix)
              ├── sweep (prompt sweep + chart)
              └── gradcheck (gradient and CTC oracles)
    """

    def __init__(self, config: Optional[CsvMasrConfig] = None):
        """
        Args:
            config: Resolved configuration; defaults to the global config manager's
        """
        self.config = config if config is not None else config_manager.config
        self.pipelines: Dict[str, BasePipeline] = {
            "gen-data": GenerateCorpusPipeline(self),
            "train": TrainPipeline(self),
            "eval": EvaluatePipeline(self),
            "sweep": SweepPipeline(self),
            "gradcheck": GradcheckPipeline(self),
        }

    def run(self, pipeline: str, **kwargs):
        """
        Execute a pipeline by name

        Raises:
            ValueError: If the pipeline name is unknown
        """
        if pipeline not in self.pipelines:
            raise ValueError(f"Unknown pipeline '{pipeline}'. Available: {', '.join(self.pipelines)}")
        logger.debug(f"Running pipeline: {pipeline}")
        return self.pipelines[pipeline](**kwargs)

    @staticmethod
    def load_model(checkpoint_path: PathLike) -> Tuple[CsvMasrModel, Checkpoint]:
        """
        Rebuild the model a checkpoint was trained as

        The checkpoint header carries the training configuration and the
        corpus configuration, which fix every parameter shape.

        Raises:
            ValueError: If the header lacks the configuration entries
        """
        checkpoint = PersistenceService.load_checkpoint(checkpoint_path)
        missing = [key for key in ("config", "corpus_config") if key not in checkpoint.extra]
        if missing:
            raise ValueError(f"Checkpoint {checkpoint_path} lacks header entries: {', '.join(missing)}")
        trained_with = CsvMasrConfig.model_validate(checkpoint.extra["config"])
        corpus_config = CorpusConfig.model_validate(checkpoint.extra["corpus_config"])
        model_config = trained_with.model_config_for(corpus_config)
        model = CsvMasrModel(model_config, checkpoint.to_store())
        logger.info(
            f"Loaded {Path(checkpoint_path).name}: variant {model_config.variant.value}, "
            f"{model.params.num_parameters()} parameters"
        )
        return model, checkpoint
