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

import json

import numpy as np
import pytest

from csvmasr.errors import CheckpointMismatchError
from csvmasr.models.checkpoint import Checkpoint, EpochLog
from csvmasr.services.persistence import WER_COLUMNS, PersistenceService


@pytest.fixture
def persistence(tmp_path):
    return PersistenceService(tmp_path / "run")


def _checkpoint(rng, **extra):
    return Checkpoint(
        params={"encoder.sv": rng.normal(size=4), "ctc.weight": rng.normal(size=(4, 3)), "scalar": np.array(2.5)},
        epoch=7,
        val_token_acc=0.75,
        val_lang_acc=None,
        config_hash="abc",
        extra=extra,
    )


class TestCorpus:
    def test_round_trip(self, tiny_splits, tmp_path):
        path = tmp_path / "corpus.jsonl"
        PersistenceService.save_corpus(tiny_splits, path)
        loaded = PersistenceService.load_corpus(path)
        assert loaded.config == tiny_splits.config
        assert [u.utterance_id for u in loaded.test] == [u.utterance_id for u in tiny_splits.test]
        for original, restored in zip(tiny_splits.train, loaded.train):
            assert restored.transcript == original.transcript
            np.testing.assert_array_equal(restored.features, original.features)

    def test_identical_corpora_give_identical_bytes(self, tiny_splits, tmp_path):
        PersistenceService.save_corpus(tiny_splits, tmp_path / "a.jsonl")
        PersistenceService.save_corpus(tiny_splits, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_header_carries_vocabulary(self, tiny_splits, tmp_path):
        path = tmp_path / "corpus.jsonl"
        PersistenceService.save_corpus(tiny_splits, path)
        header = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
        assert header["type"] == "header"
        assert header["vocabulary"]["<eos>"] == 2

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"type": "utterance"}\n', encoding="utf-8")
        with pytest.raises(ValueError):
            PersistenceService.load_corpus(path)


class TestCheckpoint:
    def test_round_trip_is_float32(self, persistence, rng):
        checkpoint = _checkpoint(rng, corpus="data/corpus.jsonl")
        path = persistence.path("epoch_007.ckpt")
        PersistenceService.save_checkpoint(checkpoint, path)
        loaded = PersistenceService.load_checkpoint(path)
        assert list(loaded.params) == list(checkpoint.params)
        for name, value in checkpoint.params.items():
            np.testing.assert_array_equal(loaded.params[name], value.astype(np.float32).astype(np.float64))
            assert loaded.params[name].shape == np.shape(value)
        assert (loaded.epoch, loaded.val_token_acc, loaded.val_lang_acc) == (7, 0.75, None)
        assert loaded.config_hash == "abc"
        assert loaded.extra == {"corpus": "data/corpus.jsonl"}

    def test_saving_twice_is_byte_identical(self, persistence, rng):
        checkpoint = _checkpoint(rng)
        PersistenceService.save_checkpoint(checkpoint, persistence.path("a.ckpt"))
        PersistenceService.save_checkpoint(checkpoint, persistence.path("b.ckpt"))
        assert persistence.path("a.ckpt").read_bytes() == persistence.path("b.ckpt").read_bytes()

    def test_truncated_payload(self, persistence, rng):
        path = persistence.path("cut.ckpt")
        PersistenceService.save_checkpoint(_checkpoint(rng), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(CheckpointMismatchError):
            PersistenceService.load_checkpoint(path)

    def test_foreign_file(self, persistence):
        path = persistence.path("other.ckpt")
        path.write_bytes(b'{"format": "something-else"}\n')
        with pytest.raises(ValueError):
            PersistenceService.load_checkpoint(path)


class TestReports:
    def test_train_log_leaves_missing_language_accuracy_empty(self, persistence):
        logs = [EpochLog(1, 2.0, 1.0, 1.5, 0.0, 0.4, None)]
        path = persistence.write_train_log(logs)
        rows = PersistenceService.read_report(path)
        assert rows[0]["val_lang_acc"] == "" and rows[0]["epoch"] == "1"

    def test_merge_replaces_matching_keys(self, persistence):
        key = ["variant", "prompt", "decode_mode", "language"]
        first = [
            {"variant": "csv", "prompt": "1hot", "decode_mode": "nar", "language": "all", "wer": 10.0},
            {"variant": "csv", "prompt": "allhot", "decode_mode": "nar", "language": "all", "wer": 12.0},
        ]
        persistence.merge_report("wer_report.csv", WER_COLUMNS, first, key)
        update = [
            {"variant": "csv", "prompt": "allhot", "decode_mode": "nar", "language": "all", "wer": 11.0},
            {"variant": "csv", "prompt": "nogt", "decode_mode": "nar", "language": "all", "wer": 90.0},
        ]
        path = persistence.merge_report("wer_report.csv", WER_COLUMNS, update, key)
        rows = PersistenceService.read_report(path)
        assert [(r["prompt"], r["wer"]) for r in rows] == [("1hot", "10.0"), ("allhot", "11.0"), ("nogt", "90.0")]


class TestManifest:
    def test_inputs_are_hashed(self, persistence, tmp_path):
        source = tmp_path / "input.txt"
        source.write_text("abc", encoding="utf-8")
        manifest = persistence.save_manifest("train", {"seed": 1}, inputs=[source])
        assert manifest.inputs[str(source)] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        assert persistence.load_manifest() == manifest
        assert manifest.command == "train"

    def test_missing_manifest(self, persistence):
        assert persistence.load_manifest() is None

    def test_read_only_service_has_no_paths(self):
        with pytest.raises(ValueError):
            PersistenceService().path("x")
