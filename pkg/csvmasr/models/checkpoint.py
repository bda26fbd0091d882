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
Checkpoint and training log models
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from csvmasr.numerics import ParamStore


@dataclass
class Checkpoint:
    """
    Named-tensor snapshot of every model parameter plus selection metadata

    Attributes:
        params: Parameter name -> array, in the model's insertion order
        epoch: 1-based epoch (0 for averaged checkpoints)
        val_token_acc: NAR validation token accuracy in [0, 1]
        val_lang_acc: Last-adapter-layer validation language accuracy in
            [0, 1], None for variants without classifiers
        config_hash: sha256 of the resolved configuration
        extra: Free-form metadata carried in the file header (config dict,
            corpus path, averaged epochs...)
    """
    params: Dict[str, np.ndarray]
    epoch: int
    val_token_acc: float
    val_lang_acc: Optional[float]
    config_hash: str
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_store(self) -> ParamStore:
        return ParamStore.from_arrays(self.params)

    def metadata(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "val_token_acc": self.val_token_acc,
            "val_lang_acc": self.val_lang_acc,
            "config_hash": self.config_hash,
            **self.extra,
        }


@dataclass
class EpochLog:
    """One row of train_log.csv"""
    epoch: int
    train_loss: float
    ctc: float
    att: float
    lang: float
    val_token_acc: float
    val_lang_acc: Optional[float]

    def as_row(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "ctc": self.ctc,
            "att": self.att,
            "lang": self.lang,
            "val_token_acc": self.val_token_acc,
            "val_lang_acc": "" if self.val_lang_acc is None else self.val_lang_acc,
        }
