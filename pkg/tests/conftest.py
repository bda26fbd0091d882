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
Shared fixtures: tiny configurations, a tiny corpus and seeded generators
"""

import numpy as np
import pytest

from csvmasr.config.schema import (
    AdapterConfig,
    CorpusConfig,
    CsvMasrConfig,
    DecoderConfig,
    EncoderConfig,
    RoutingVariant,
    TrainConfig,
)
from csvmasr.services.corpus import generate_corpus
from csvmasr.services.model import CsvMasrModel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_corpus_config():
    return CorpusConfig(
        num_languages=3,
        tokens_per_language=3,
        d_feat=6,
        frames_per_token=2,
        transcript_len_range=(2, 3),
        train_per_language=6,
        val_per_language=2,
        test_per_language=3,
        seed=7,
    )


@pytest.fixture
def tiny_splits(tiny_corpus_config):
    return generate_corpus(tiny_corpus_config)


def _tiny_config(variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR, corpus: CorpusConfig = None, **train):
    """Small enough for a full train/eval cycle inside a unit test"""
    defaults = dict(variant=variant, epochs=2, batch_size=4, k_average=2, seed=3)
    defaults.update(train)
    return CsvMasrConfig(
        corpus=corpus or CorpusConfig(),
        encoder=EncoderConfig(
            num_layers=2, d_model=8, num_heads=2, ffn_dim=16, conv_kernel=3,
            adapter_layers=[1, 2], rel_pos_clip=4,
        ),
        adapters=AdapterConfig(bottleneck_dim=4),
        decoder=DecoderConfig(num_layers=1, max_decode_len=6, beam_width=2),
        train=TrainConfig(**defaults),
    )


@pytest.fixture
def make_config(tiny_corpus_config):
    """Factory: make_config(variant, **train_overrides)"""
    def make(variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR, **train):
        return _tiny_config(variant, tiny_corpus_config, **train)
    return make


@pytest.fixture
def make_model(tiny_corpus_config):
    """Factory: make_model(variant, seed) with freshly initialized parameters"""
    def make(variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR, seed: int = 0) -> CsvMasrModel:
        config = _tiny_config(variant, tiny_corpus_config)
        return CsvMasrModel.initialize(config.model_config_for(tiny_corpus_config), seed=seed)
    return make


@pytest.fixture
def csv_model(make_model):
    return make_model(RoutingVariant.SUMMARY_VECTOR)
