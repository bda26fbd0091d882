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

from pathlib import Path

import pytest
from pydantic import ValidationError

from csvmasr.config import (
    ConfigManager,
    CsvMasrConfig,
    EncoderConfig,
    RoutingVariant,
    config_manager,
    deep_merge,
    load_config_dict,
    save_config_dict,
)
from csvmasr.config.schema import CorpusConfig, EvalConfig, LossConfig, TrainConfig

EXAMPLE_CONFIG = Path(__file__).resolve().parents[1] / "config.example.yaml"


@pytest.fixture
def restore_manager():
    path, config = config_manager.config_path, config_manager._config
    yield config_manager
    config_manager.config_path, config_manager._config = path, config


class TestSchema:
    def test_example_file_lists_the_defaults(self):
        assert CsvMasrConfig(**load_config_dict(str(EXAMPLE_CONFIG))) == CsvMasrConfig()

    def test_variant_capabilities(self):
        assert RoutingVariant("csv") is RoutingVariant.SUMMARY_VECTOR
        assert [v.value for v in RoutingVariant if v.uses_adapters] == ["uniform", "framewise", "csv"]
        assert [v.value for v in RoutingVariant if v.uses_classifier] == ["framewise", "csv"]

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"d_model": 30, "num_heads": 4},
            {"conv_kernel": 4},
            {"adapter_layers": [4, 2]},
            {"adapter_layers": [0, 2]},
            {"num_layers": 3, "adapter_layers": [2, 4]},
        ],
    )
    def test_invalid_encoder(self, kwargs):
        with pytest.raises(ValidationError):
            EncoderConfig(**kwargs)

    def test_invalid_train_and_eval(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=2, k_average=3)
        with pytest.raises(ValidationError):
            TrainConfig(precision=16)
        with pytest.raises(ValidationError):
            TrainConfig(p_insert=1.5)
        with pytest.raises(ValidationError):
            TrainConfig(learning_rate=-1e-3)
        assert TrainConfig(learning_rate=0.0).learning_rate == 0.0
        with pytest.raises(ValidationError):
            EvalConfig(decode_mode="ctc")
        with pytest.raises(ValidationError):
            CorpusConfig(transcript_len_range=(4, 2))
        with pytest.raises(ValidationError):
            CorpusConfig(num_languages=1)

    def test_longest_transcript_must_fit_the_decoder(self):
        CsvMasrConfig(**{"corpus": {"transcript_len_range": [2, 5]}, "decoder": {"max_decode_len": 6}})
        with pytest.raises(ValidationError):
            CsvMasrConfig(**{"corpus": {"transcript_len_range": [2, 6]}, "decoder": {"max_decode_len": 6}})

    def test_lambda_alias(self):
        config = CsvMasrConfig(**{"loss": {"lambda": 0.2}})
        assert config.loss.lambda_ == 0.2
        assert config.to_dict()["loss"] == {"lambda": 0.2, "beta": 0.3}
        assert LossConfig(lambda_=0.7).lambda_ == 0.7

    def test_config_hash(self):
        assert CsvMasrConfig().config_hash() == CsvMasrConfig().config_hash()
        assert CsvMasrConfig().config_hash() != CsvMasrConfig(**{"train": {"seed": 1}}).config_hash()

    def test_model_config_follows_the_corpus(self):
        config = CsvMasrConfig(**{"train": {"variant": "baseline"}})
        model_config = config.model_config_for(CorpusConfig(num_languages=4, tokens_per_language=5, d_feat=7))
        assert (model_config.num_languages, model_config.vocab_size, model_config.d_feat) == (4, 23, 7)
        assert model_config.adapter_layers == []
        assert CsvMasrConfig().model_config_for().adapter_layers == [2, 4]


class TestLoader:
    def test_missing_file_gives_empty_dict(self, tmp_path):
        assert load_config_dict(str(tmp_path / "absent.yaml")) == {}

    def test_save_and_load(self, tmp_path):
        path = tmp_path / "config.yaml"
        save_config_dict(CsvMasrConfig().to_dict(), str(path))
        assert CsvMasrConfig(**load_config_dict(str(path))) == CsvMasrConfig()

    def test_top_level_must_be_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- train\n- eval\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_config_dict(str(path))
        empty = tmp_path / "empty.yaml"
        empty.write_text("", encoding="utf-8")
        assert load_config_dict(str(empty)) == {}

    def test_deep_merge(self):
        base = {"train": {"epochs": 5, "seed": 1}, "eval": {"split": "test"}}
        merged = deep_merge(base, {"train": {"epochs": 9}, "runtime": {"threads": 2}})
        assert merged == {"train": {"epochs": 9, "seed": 1}, "eval": {"split": "test"}, "runtime": {"threads": 2}}


class TestManager:
    def test_singleton(self):
        assert ConfigManager() is config_manager

    def test_use_and_update(self, restore_manager, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("train:\n  epochs: 4\n  k_average: 2\n", encoding="utf-8")
        restore_manager.use(str(path))
        assert restore_manager.config.train.epochs == 4
        restore_manager.update({"train": {"batch_size": 2}})
        assert restore_manager.config.train.batch_size == 2
        assert restore_manager.get("train")["epochs"] == 4
        assert restore_manager.get("train.epochs") == 4
        assert restore_manager.get("loss.lambda") == 0.5
        assert restore_manager.get("train.missing", "x") == "x"
        with pytest.raises(ValidationError):
            restore_manager.update({"train": {"k_average": 9}})

    def test_save(self, restore_manager, tmp_path):
        path = tmp_path / "saved.yaml"
        restore_manager.config_path = path
        restore_manager.config = CsvMasrConfig(**{"corpus": {"seed": 11}})
        restore_manager.save()
        assert load_config_dict(str(path))["corpus"]["seed"] == 11
