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

from csvmasr.config.schema import RoutingVariant
from csvmasr.errors import CheckpointMismatchError, CorpusMismatchError, DivergenceError
from csvmasr.models.checkpoint import Checkpoint
from csvmasr.numerics import ParamStore
from csvmasr.services.trainer import (
    AdamOptimizer,
    Trainer,
    average_checkpoints,
    check_corpus_fits,
    epoch_batches,
    sample_lid_mask,
    select_best,
    token_accuracy,
)


def _checkpoint(epoch, acc, **params):
    params = params or {"w": np.full((2, 2), float(epoch))}
    return Checkpoint(params=params, epoch=epoch, val_token_acc=acc, val_lang_acc=None, config_hash="h")


class TestLidSampling:
    def test_ground_truth_always_present(self, rng):
        for _ in range(200):
            language = int(rng.integers(0, 4))
            assert sample_lid_mask(language, 4, 0.3, rng).bits[language] == 1

    def test_extreme_probabilities(self, rng):
        assert sample_lid_mask(2, 4, 0.0, rng).bits == (0, 0, 1, 0)
        assert sample_lid_mask(2, 4, 1.0, rng).bits == (1, 1, 1, 1)

    def test_insertion_rate(self, rng):
        draws = np.array([sample_lid_mask(0, 3, 0.5, rng).bits for _ in range(4000)])
        np.testing.assert_allclose(draws[:, 1:].mean(), 0.5, atol=0.03)

    def test_popcount_over_seven_languages(self, rng):
        draws = 100_000
        counts = np.array([sum(sample_lid_mask(3, 7, 0.5, rng).bits) for _ in range(draws)])
        # ground truth plus Binomial(6, 0.5) insertions
        sigma = np.sqrt(6 * 0.25 / draws)
        assert abs(counts.mean() - 4.0) < 3 * sigma
        assert counts.min() >= 1 and counts.max() <= 7

    @pytest.mark.parametrize("p, popcount", [(0.0, 1), (1.0, 7)])
    def test_extreme_popcounts_over_many_draws(self, rng, p, popcount):
        for _ in range(2000):
            language = int(rng.integers(0, 7))
            mask = sample_lid_mask(language, 7, p, rng)
            assert sum(mask.bits) == popcount
            assert mask.bits[language] == 1

    def test_stream_position_is_independent_of_p(self):
        first, second = np.random.default_rng(9), np.random.default_rng(9)
        sample_lid_mask(0, 5, 0.1, first)
        sample_lid_mask(0, 5, 0.9, second)
        assert first.random() == second.random()

    @pytest.mark.parametrize("p", [-0.1, 1.5])
    def test_invalid_probability(self, rng, p):
        with pytest.raises(ValueError):
            sample_lid_mask(0, 3, p, rng)


def test_adam_first_step_moves_by_learning_rate():
    store = ParamStore.from_arrays({"x": np.array([1.0, -1.0])})
    optimizer = AdamOptimizer(learning_rate=0.1)
    optimizer.step(store, {"x": np.array([2.0, -0.5])})
    np.testing.assert_allclose(store["x"], [0.9, -0.9], atol=1e-7)
    assert optimizer.step_count == 1


def test_epoch_batches_cover_each_utterance_once(tiny_splits):
    batches = epoch_batches(tiny_splits.train, 4, np.random.default_rng(0))
    seen = [u.utterance_id for batch in batches for u in batch]
    assert sorted(seen) == sorted(u.utterance_id for u in tiny_splits.train)
    for batch in batches:
        assert 1 <= len(batch) <= 4
        assert len({u.num_frames for u in batch}) == 1
    again = epoch_batches(tiny_splits.train, 4, np.random.default_rng(0))
    assert [[u.utterance_id for u in b] for b in again] == [[u.utterance_id for u in b] for b in batches]


@pytest.mark.parametrize("edits, reference, expected", [(0, 10, 1.0), (3, 10, 0.7), (12, 10, 0.0), (0, 0, 0.0)])
def test_token_accuracy(edits, reference, expected):
    assert token_accuracy(edits, reference) == pytest.approx(expected)


class TestTrainer:
    def test_train_produces_checkpoints_and_average(self, make_config, tiny_splits):
        trainer = Trainer(make_config(), tiny_splits)
        result = trainer.train()
        assert [c.epoch for c in result.checkpoints] == [1, 2]
        assert [log.epoch for log in result.logs] == [1, 2]
        for log in result.logs:
            assert np.isfinite(log.train_loss)
            assert 0.0 <= log.val_token_acc <= 1.0
            assert 0.0 <= log.val_lang_acc <= 1.0
        assert result.averaged.epoch == 0
        assert sorted(result.averaged.extra["averaged_epochs"]) == [1, 2]
        assert result.averaged.config_hash == trainer.config_hash

    def test_deterministic(self, make_config, tiny_splits):
        first = Trainer(make_config(epochs=1, k_average=1), tiny_splits).train()
        second = Trainer(make_config(epochs=1, k_average=1), tiny_splits).train()
        for name, value in first.checkpoints[0].params.items():
            np.testing.assert_array_equal(value, second.checkpoints[0].params[name])
        assert first.logs[0].train_loss == second.logs[0].train_loss

    def test_training_moves_parameters(self, make_config, tiny_splits):
        trainer = Trainer(make_config(epochs=1, k_average=1), tiny_splits)
        before = trainer.model.params.copy()
        trainer.run_epoch(1)
        assert not np.array_equal(before["encoder.sv"], trainer.model.params["encoder.sv"])

    def test_zero_learning_rate_leaves_parameters_untouched(self, make_config, tiny_splits):
        trainer = Trainer(make_config(epochs=1, k_average=1, learning_rate=0.0), tiny_splits)
        before = trainer.model.params.copy()
        log = trainer.run_epoch(1)
        assert np.isfinite(log.train_loss)
        for name in before.names():
            np.testing.assert_array_equal(before[name], trainer.model.params[name])

    def test_corpus_longer_than_the_decoder(self, make_config, tiny_splits):
        config = make_config()
        config = config.model_copy(update={"decoder": config.decoder.model_copy(update={"max_decode_len": 3})})
        with pytest.raises(CorpusMismatchError) as excinfo:
            check_corpus_fits(config, tiny_splits)
        assert excinfo.value.setting == "decoder.max_decode_len"
        with pytest.raises(CorpusMismatchError):
            Trainer(config, tiny_splits)
        check_corpus_fits(make_config(), tiny_splits)

    def test_uniform_has_no_language_accuracy(self, make_config, tiny_splits):
        trainer = Trainer(make_config(RoutingVariant.UNIFORM), tiny_splits)
        token_acc, lang_acc = trainer.validate()
        assert 0.0 <= token_acc <= 1.0
        assert lang_acc is None

    def test_language_restriction(self, make_config, tiny_splits):
        trainer = Trainer(make_config(languages=[0, 2]), tiny_splits)
        assert {u.language_id for u in trainer._train_utterances()} == {0, 2}
        assert {u.language_id for u in trainer._val_utterances()} == {0, 2}

    def test_divergence_reports_epoch_and_step(self, make_config, tiny_splits):
        trainer = Trainer(make_config(), tiny_splits)
        trainer.model.params.set("encoder.sv", np.full(8, np.nan))
        with pytest.raises(DivergenceError) as excinfo:
            trainer.run_epoch(3)
        assert excinfo.value.epoch == 3
        assert excinfo.value.step == 1

    def test_callbacks(self, make_config, tiny_splits):
        logs, checkpoints = [], []
        Trainer(make_config(epochs=2), tiny_splits).train(on_epoch=logs.append, on_checkpoint=checkpoints.append)
        assert [log.epoch for log in logs] == [1, 2]
        assert [c.epoch for c in checkpoints] == [1, 2]


class TestCheckpointSelection:
    def test_select_best_breaks_ties_by_epoch(self):
        checkpoints = [_checkpoint(3, 0.8), _checkpoint(1, 0.8), _checkpoint(2, 0.9)]
        assert [c.epoch for c in select_best(checkpoints, 2)] == [2, 1]

    @pytest.mark.parametrize("k", [0, 4])
    def test_select_best_invalid_k(self, k):
        with pytest.raises(ValueError):
            select_best([_checkpoint(1, 0.5), _checkpoint(2, 0.5), _checkpoint(3, 0.5)], k)

    def test_average_of_identical_checkpoints_is_bitwise(self, rng):
        value = rng.normal(size=(3, 3))
        checkpoints = [_checkpoint(e, 0.5, w=value.copy()) for e in (1, 2, 3)]
        np.testing.assert_array_equal(average_checkpoints(checkpoints, 3).params["w"], value)

    def test_average_is_order_independent(self, rng):
        checkpoints = [_checkpoint(e, 0.1 * e, w=rng.normal(size=4)) for e in (1, 2, 3, 4)]
        forward = average_checkpoints(checkpoints, 3)
        backward = average_checkpoints(list(reversed(checkpoints)), 3)
        np.testing.assert_array_equal(forward.params["w"], backward.params["w"])
        assert forward.extra["averaged_epochs"] == [4, 3, 2]
        expected = np.mean([c.params["w"] for c in checkpoints[1:]], axis=0)
        np.testing.assert_allclose(forward.params["w"], expected, atol=1e-12)

    def test_mismatched_names(self):
        with pytest.raises(CheckpointMismatchError):
            average_checkpoints([_checkpoint(1, 0.5, w=np.zeros(2)), _checkpoint(2, 0.5, v=np.zeros(2))], 2)

    def test_mismatched_shapes(self):
        with pytest.raises(CheckpointMismatchError) as excinfo:
            average_checkpoints([_checkpoint(1, 0.5, w=np.zeros(2)), _checkpoint(2, 0.5, w=np.zeros(3))], 2)
        assert excinfo.value.tensor_name == "w"

    def test_mismatch_outside_the_top_k_is_still_rejected(self):
        checkpoints = [
            _checkpoint(1, 0.9, w=np.zeros(2)),
            _checkpoint(2, 0.8, w=np.zeros(2)),
            _checkpoint(3, 0.1, w=np.zeros(3)),
        ]
        with pytest.raises(CheckpointMismatchError) as excinfo:
            average_checkpoints(checkpoints, 2)
        assert excinfo.value.tensor_name == "w"
        with pytest.raises(CheckpointMismatchError):
            average_checkpoints(checkpoints[:2] + [_checkpoint(3, 0.1, v=np.zeros(2))], 1)
