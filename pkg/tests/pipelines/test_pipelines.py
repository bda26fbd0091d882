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

import numpy as np
import pytest

from csvmasr import CsvMasrCore
from csvmasr.config.schema import RoutingVariant
from csvmasr.models.checkpoint import Checkpoint
from csvmasr.pipelines.gradcheck import (
    ctc_gradient_check,
    ctc_oracle_check,
    micro_batch,
    micro_model_check,
    micro_model_config,
)
from csvmasr.pipelines.train import AVERAGED_CHECKPOINT, checkpoint_name
from csvmasr.services.persistence import PersistenceService


@pytest.fixture
def trained(make_config, tmp_path):
    """Corpus plus a two-epoch csv run under tmp_path"""
    core = CsvMasrCore(make_config())
    corpus = tmp_path / "data" / "corpus.jsonl"
    core.run("gen-data", out=corpus)
    result = core.run("train", corpus=corpus, out_dir=tmp_path / "run")
    return core, corpus, tmp_path / "run", result


def test_gen_data_writes_corpus_and_manifest(make_config, tmp_path):
    events = []
    core = CsvMasrCore(make_config())
    splits = core.run("gen-data", progress_callback=events.append, out=tmp_path / "corpus.jsonl")
    assert len(splits.train) == 18
    assert (tmp_path / "corpus.jsonl").exists()
    manifest = PersistenceService(tmp_path).load_manifest()
    assert manifest.command == "gen-data"
    assert events[-1].event_type == "completed" and events[-1].progress == 1.0


class TestTrainPipeline:
    def test_outputs(self, trained):
        _, corpus, run_dir, result = trained
        for name in (checkpoint_name(1), checkpoint_name(2), AVERAGED_CHECKPOINT, "train_log.csv", "manifest.json"):
            assert (run_dir / name).exists(), name
        rows = PersistenceService.read_report(run_dir / "train_log.csv")
        assert [row["epoch"] for row in rows] == ["1", "2"]
        manifest = PersistenceService(run_dir).load_manifest()
        assert str(corpus) in manifest.inputs

    def test_averaged_checkpoint_reloads_as_the_trained_model(self, trained):
        core, corpus, run_dir, result = trained
        model, checkpoint = core.load_model(run_dir / AVERAGED_CHECKPOINT)
        assert model.config.variant == RoutingVariant.SUMMARY_VECTOR
        assert checkpoint.extra["corpus"] == str(corpus)
        assert sorted(checkpoint.extra["averaged_epochs"]) == [1, 2]
        for name, value in result.averaged.params.items():
            np.testing.assert_array_equal(model.params[name], value.astype(np.float32).astype(np.float64))

    def test_checkpoint_without_config_is_rejected(self, tmp_path):
        path = tmp_path / "bare.ckpt"
        PersistenceService.save_checkpoint(
            Checkpoint(params={"w": np.zeros(2)}, epoch=1, val_token_acc=0.0, val_lang_acc=None, config_hash="x"),
            path,
        )
        with pytest.raises(ValueError):
            CsvMasrCore.load_model(path)


class TestEvaluatePipeline:
    def test_reports(self, trained):
        core, _, run_dir, _ = trained
        result = core.run("eval", checkpoint=run_dir / AVERAGED_CHECKPOINT, two_hot=True)
        eval_dir = run_dir / "eval"
        wer_rows = PersistenceService.read_report(eval_dir / "wer_report.csv")
        assert len(wer_rows) == 2 * 4
        assert {row["prompt"] for row in wer_rows} == {"1hot"}
        lca_rows = PersistenceService.read_report(eval_dir / "lca_report.csv")
        assert {row["layer"] for row in lca_rows} == {"1", "2"}
        assert len(PersistenceService.read_report(eval_dir / "two_hot.csv")) == 2 * 9
        assert result.layer_accuracy is not None and len(result.two_hot) == 2
        assert PersistenceService(eval_dir).load_manifest().command == "eval"

    def test_prompts_accumulate(self, trained, make_config):
        _, _, run_dir, _ = trained
        checkpoint = run_dir / AVERAGED_CHECKPOINT
        for prompt in ("1hot", "allhot", "1hot"):
            config = make_config()
            config.eval.prompt = prompt
            config.eval.decode_mode = "nar"
            CsvMasrCore(config).run("eval", checkpoint=checkpoint, out_dir=run_dir / "prompts")
        rows = PersistenceService.read_report(run_dir / "prompts" / "wer_report.csv")
        assert [(row["prompt"], row["language"]) for row in rows][:4] == [
            ("1hot", "0"), ("1hot", "1"), ("1hot", "2"), ("1hot", "all"),
        ]
        assert len(rows) == 8

    def test_uniform_skips_layer_accuracy(self, make_config, tmp_path):
        core = CsvMasrCore(make_config(RoutingVariant.UNIFORM, epochs=1, k_average=1))
        corpus = tmp_path / "corpus.jsonl"
        core.run("gen-data", out=corpus)
        core.run("train", corpus=corpus, out_dir=tmp_path / "uniform")
        result = core.run("eval", checkpoint=tmp_path / "uniform" / AVERAGED_CHECKPOINT)
        assert result.layer_accuracy is None
        assert not (tmp_path / "uniform" / "eval" / "lca_report.csv").exists()


class TestSweepPipeline:
    def test_sweep_outputs(self, trained):
        core, _, run_dir, _ = trained
        results = core.run("sweep", checkpoint=run_dir / AVERAGED_CHECKPOINT)
        assert [r.language for r in results] == [0, 1, 2]
        rows = PersistenceService.read_report(run_dir / "sweep" / "sweep.csv")
        assert len(rows) == 3 * 3
        assert (run_dir / "sweep" / "sweep.svg").exists()

    def test_chart_is_reproducible(self, trained):
        core, _, run_dir, _ = trained
        checkpoint = run_dir / AVERAGED_CHECKPOINT
        core.run("sweep", checkpoint=checkpoint, out_dir=run_dir / "a", languages=[1])
        core.run("sweep", checkpoint=checkpoint, out_dir=run_dir / "b", languages=[1])
        assert (run_dir / "a" / "sweep.svg").read_bytes() == (run_dir / "b" / "sweep.svg").read_bytes()


def test_unknown_pipeline(make_config):
    with pytest.raises(ValueError):
        CsvMasrCore(make_config()).run("export")


class TestGradcheck:
    def test_ctc_oracles(self):
        assert ctc_oracle_check(cases=100).passed
        assert ctc_gradient_check(cases=10).passed

    def test_micro_batch_targets_belong_to_their_language(self):
        config = micro_model_config()
        batch = micro_batch(config, seed=3, size=3)
        assert batch.features.shape == (3, 6, 4)
        for language, transcript, mask in zip(batch.language_ids, batch.transcripts, batch.masks):
            assert all(3 + 2 * language <= t < 5 + 2 * language for t in transcript)
            assert mask[language]

    @pytest.mark.slow
    @pytest.mark.parametrize("variant", [RoutingVariant.SUMMARY_VECTOR, RoutingVariant.FRAMEWISE])
    def test_micro_model_gradients(self, variant):
        result = micro_model_check(variant)
        assert result.passed, f"{result.name}: {result.max_error:.2e}"

    @pytest.mark.slow
    def test_pipeline_reports_every_check(self, make_config):
        events = []
        results = CsvMasrCore(make_config()).run("gradcheck", progress_callback=events.append, cases=5)
        assert all(r.passed for r in results)
        assert {"ctc_oracle", "ctc_gradient", "micro_model[csv]"} <= {r.name for r in results}
        assert events[-1].event_type == "completed"
