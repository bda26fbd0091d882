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

from csvmasr.config.schema import LossConfig, RoutingVariant
from csvmasr.models.outputs import Batch
from csvmasr.models.routing import LidMask
from csvmasr.numerics import value_and_grad
from csvmasr.services.model import CsvMasrModel, adapter_param_names, classifier_param_names

ADAPTER_VARIANTS = [RoutingVariant.SUMMARY_VECTOR, RoutingVariant.FRAMEWISE, RoutingVariant.UNIFORM]


def _batch(utterances, prompt_language=None):
    masks = [LidMask.one_hot(prompt_language if prompt_language is not None else u.language_id, 3) for u in utterances]
    return Batch.from_utterances(utterances, masks)


def _scramble_other_languages(model: CsvMasrModel, keep: int, rng) -> CsvMasrModel:
    """Randomize every adapter and classifier column that does not belong to `keep`"""
    store = model.params.copy()
    for language in range(model.config.num_languages):
        if language == keep:
            continue
        for name in adapter_param_names(model.config, language):
            store.set(name, rng.normal(size=store[name].shape) * 3.0)
    for name in classifier_param_names(model.config):
        value = store[name].copy()
        others = [i for i in range(model.config.num_languages) if i != keep]
        value[..., others] = rng.normal(size=value[..., others].shape) * 3.0
        store.set(name, value)
    return model.with_params(store)


class TestInitialization:
    def test_deterministic(self, make_model):
        first, second = make_model(seed=5), make_model(seed=5)
        assert first.params.names() == second.params.names()
        for name, value in first.params.items():
            np.testing.assert_array_equal(value, second.params[name])

    def test_parameter_layout_per_variant(self, make_model):
        csv = make_model(RoutingVariant.SUMMARY_VECTOR).params
        uniform = make_model(RoutingVariant.UNIFORM).params
        baseline = make_model(RoutingVariant.BASELINE).params
        assert "encoder.layers.2.classifier.weight" in csv
        assert "encoder.layers.2.adapters.2.up.weight" in uniform
        assert "encoder.layers.2.classifier.weight" not in uniform
        assert not any(".adapters." in name for name in baseline)
        assert csv["encoder.layers.1.classifier.weight"].shape == (8, 3)
        assert csv["decoder.pos"].shape == (6, 8)

    def test_adapter_param_names(self, csv_model):
        names = adapter_param_names(csv_model.config, 1)
        assert len(names) == 2 * 4
        assert all(".adapters.1." in name and name in csv_model.params for name in names)


class TestIsolation:
    @pytest.mark.parametrize("variant", ADAPTER_VARIANTS)
    def test_one_hot_ignores_other_languages(self, make_model, tiny_splits, rng, variant):
        model = make_model(variant)
        utterances = [u for u in tiny_splits.test if u.language_id == 1 and u.num_frames == tiny_splits.test[3].num_frames]
        batch = _batch(utterances)
        scrambled = _scramble_other_languages(model, keep=1, rng=rng)

        p, q = model.tensors(), scrambled.tensors()
        reference = model.ctc_log_probs(model.encode(batch.features, batch.masks, p), p).data
        other = scrambled.ctc_log_probs(scrambled.encode(batch.features, batch.masks, q), q).data
        np.testing.assert_array_equal(reference, other)
        assert model.transcribe_nar(batch.features, batch.masks) == scrambled.transcribe_nar(batch.features, batch.masks)

    def test_all_hot_depends_on_every_adapter(self, csv_model, tiny_splits, rng):
        utterance = tiny_splits.test[0]
        masks = LidMask.all_hot(3).as_array()[None]
        scrambled = _scramble_other_languages(csv_model, keep=utterance.language_id, rng=rng)
        before = csv_model.encode(utterance.features[None], masks).frames.data
        after = scrambled.encode(utterance.features[None], masks).frames.data
        assert not np.allclose(before, after)

    def test_one_hot_weight_is_exactly_one(self, csv_model, tiny_splits):
        utterance = tiny_splits.test[0]
        output = csv_model.encode(utterance.features[None], LidMask.one_hot(2, 3).as_array()[None])
        for record in output.routing_records:
            np.testing.assert_array_equal(record.weights.values, [[0.0, 0.0, 1.0]])


class TestLosses:
    @pytest.mark.parametrize("variant", list(RoutingVariant))
    def test_forward_losses_are_finite(self, make_model, tiny_splits, variant):
        model = make_model(variant)
        utterances = [u for u in tiny_splits.train if u.num_frames == tiny_splits.train[0].num_frames][:3]
        breakdown = model.forward_losses(_batch(utterances), LossConfig())
        assert np.isfinite(breakdown.total) and breakdown.ctc > 0 and breakdown.att > 0
        if variant.uses_classifier:
            assert breakdown.lang > 0
        else:
            assert breakdown.lang == 0.0

    def test_uniform_has_no_language_loss_under_full_weight(self, make_model, tiny_splits):
        model = make_model(RoutingVariant.UNIFORM)
        breakdown = model.forward_losses(_batch(tiny_splits.train[:1]), LossConfig(lambda_=1.0))
        assert breakdown.total == 0.0

    def test_mixed_transcript_lengths_are_token_weighted(self, csv_model, rng):
        features = rng.normal(size=(2, 6, 6))
        masks = np.array([[True, False, False], [False, True, False]])
        transcripts = [(3, 4, 5), (6, 7)]
        batch = Batch(features, masks, np.array([0, 1]), transcripts)
        combined = csv_model.forward_losses(batch, LossConfig()).att

        singles = [
            csv_model.forward_losses(Batch(features[b:b + 1], masks[b:b + 1], np.array([b]), [transcripts[b]]),
                                     LossConfig()).att
            for b in range(2)
        ]
        expected = (4 * singles[0] + 3 * singles[1]) / 7
        np.testing.assert_allclose(combined, expected, atol=1e-10)

    def test_gradients_reach_classifier_and_active_adapters(self, csv_model, tiny_splits):
        utterances = [u for u in tiny_splits.train if u.language_id == 0][:1]
        program = csv_model.loss_program(_batch(utterances), LossConfig())
        value, grads = value_and_grad(program, csv_model.params)
        assert np.isfinite(value)
        assert np.any(grads["encoder.layers.2.classifier.weight"] != 0)
        assert np.any(grads["encoder.layers.2.adapters.0.up.weight"] != 0)
        # inactive experts are multiplied by exact zeros
        assert np.all(grads["encoder.layers.2.adapters.1.up.weight"] == 0)


class TestTranscription:
    def test_nar_tokens_are_content_tokens(self, csv_model, tiny_splits):
        batch = _batch([tiny_splits.test[0]])
        (tokens,) = csv_model.transcribe_nar(batch.features, batch.masks)
        assert all(3 <= t < csv_model.config.vocab_size for t in tokens)

    def test_language_predictions(self, make_model, tiny_splits):
        batch = _batch(tiny_splits.test[:1])
        csv = make_model(RoutingVariant.SUMMARY_VECTOR).language_predictions(batch.features, batch.masks)
        framewise = make_model(RoutingVariant.FRAMEWISE).language_predictions(batch.features, batch.masks)
        uniform = make_model(RoutingVariant.UNIFORM).language_predictions(batch.features, batch.masks)
        assert sorted(csv) == [1, 2] and sorted(framewise) == [1, 2]
        assert all(0 <= int(v[0]) < 3 for v in list(csv.values()) + list(framewise.values()))
        assert uniform == {}
