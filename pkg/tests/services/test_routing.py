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
from csvmasr.errors import InvalidMaskError, ShapeError
from csvmasr.models.routing import LidMask, Prompt, RoutingWeights
from csvmasr.numerics import ParamStore, Tensor, ops
from csvmasr.services.routing import (
    adapter_forward,
    combine,
    lidconcat_augment,
    masked_softmax,
    route,
    uniform_alpha,
)


class TestLidMask:
    def test_constructors(self):
        assert LidMask.one_hot(1, 3).bits == (0, 1, 0)
        assert LidMask.all_hot(3).popcount == 3
        assert LidMask.from_bitstring("101").active == (0, 2)
        assert LidMask.from_active([2, 0], 4).to_bitstring() == "1010"

    @pytest.mark.parametrize("bits", [(0, 0, 0), (1, 2, 0), ()])
    def test_invalid_masks(self, bits):
        with pytest.raises(InvalidMaskError):
            LidMask(bits)

    def test_prompt_parsing(self):
        assert Prompt.parse("1hot").mask_for(2, 3).bits == (0, 0, 1)
        assert Prompt.parse("allhot").mask_for(0, 3).bits == (1, 1, 1)
        assert Prompt.parse("nogt").mask_for(1, 3).bits == (1, 0, 1)
        assert Prompt.parse("mask=011").mask_for(0, 3).bits == (0, 1, 1)
        assert str(Prompt.parse("mask=011")) == "mask=011"
        with pytest.raises(ValueError):
            Prompt.parse("twohot")
        with pytest.raises(InvalidMaskError):
            Prompt.parse("mask=01").mask_for(0, 3)


class TestWeights:
    def test_masked_softmax_reference(self):
        weights = masked_softmax(np.array([1.0, 2.0, 3.0]), LidMask.from_bitstring("101"))
        np.testing.assert_allclose(weights.values, [0.11920292, 0.0, 0.88079708], atol=1e-8)
        assert weights.granularity == "utterance"

    def test_framewise_granularity(self, rng):
        masks = np.array([[True, False, True], [False, True, False]])
        weights = masked_softmax(rng.normal(size=(2, 4, 3)), masks)
        assert weights.granularity == "frame"
        assert np.all(weights.values[0, :, 1] == 0.0)
        assert np.all(weights.values[1, :, 1] == 1.0)

    def test_uniform_alpha(self):
        alpha = uniform_alpha(LidMask.from_bitstring("1101")).values
        np.testing.assert_allclose(alpha, [1 / 3, 1 / 3, 0.0, 1 / 3])
        assert alpha[2] == 0.0


class TestCombine:
    def _experts(self, rng, batch=2, steps=3, dim=4, count=3):
        return [Tensor(rng.normal(size=(batch, steps, dim))) for _ in range(count)]

    def test_one_hot_selects_one_expert(self, rng):
        h0 = Tensor(rng.normal(size=(2, 3, 4)))
        experts = self._experts(rng)
        alpha = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        out = combine(h0, experts, RoutingWeights("utterance", Tensor(alpha))).data
        np.testing.assert_array_equal(out[0], h0.data[0] + experts[1].data[0])
        np.testing.assert_array_equal(out[1], h0.data[1] + experts[0].data[1])

    def test_framewise_weights(self, rng):
        h0 = Tensor(np.zeros((1, 2, 4)))
        experts = self._experts(rng, batch=1, steps=2)
        alpha = np.array([[[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]])
        out = combine(h0, experts, RoutingWeights("frame", Tensor(alpha))).data
        np.testing.assert_allclose(out[0, 0], 0.5 * (experts[0].data[0, 0] + experts[1].data[0, 0]))
        np.testing.assert_array_equal(out[0, 1], experts[2].data[0, 1])

    def test_shape_mismatch(self, rng):
        h0 = Tensor(rng.normal(size=(2, 3, 4)))
        with pytest.raises(ShapeError):
            combine(h0, self._experts(rng), RoutingWeights("utterance", Tensor(np.ones((2, 2)) / 2)))


class TestRoute:
    def test_uniform_needs_no_classifier(self, rng):
        h0 = Tensor(rng.normal(size=(1, 3, 4)))
        weights, logits = route(h0, ops.index(h0, (slice(None), 2)), LidMask.all_hot(2).as_array()[None],
                                RoutingVariant.UNIFORM)
        assert logits is None
        np.testing.assert_allclose(weights.values, [[0.5, 0.5]])

    def test_csv_reads_the_summary_row(self, rng):
        h0 = Tensor(rng.normal(size=(2, 3, 4)))
        sv = ops.index(h0, (slice(None), 2))
        classifier = (Tensor(rng.normal(size=(4, 3))), Tensor(np.zeros(3)))
        weights, logits = route(h0, sv, np.ones((2, 3), dtype=bool), RoutingVariant.SUMMARY_VECTOR, classifier)
        assert logits.shape == (2, 3)
        np.testing.assert_allclose(logits.data, h0.data[:, 2] @ classifier[0].data)
        assert weights.granularity == "utterance"

    def test_framewise_logits_per_row(self, rng):
        h0 = Tensor(rng.normal(size=(2, 3, 4)))
        classifier = (Tensor(rng.normal(size=(4, 3))), Tensor(np.zeros(3)))
        weights, logits = route(h0, ops.index(h0, (slice(None), 2)), np.ones((2, 3), dtype=bool),
                                RoutingVariant.FRAMEWISE, classifier)
        assert logits.shape == (2, 3, 3)
        assert weights.granularity == "frame"

    @pytest.mark.parametrize("variant", [RoutingVariant.BASELINE, RoutingVariant.LIDCONCAT])
    def test_non_adapter_variants_rejected(self, rng, variant):
        h0 = Tensor(rng.normal(size=(1, 2, 4)))
        with pytest.raises(ValueError):
            route(h0, ops.index(h0, (slice(None), 1)), np.ones((1, 2), dtype=bool), variant)

    def test_learnable_variant_requires_classifier(self, rng):
        h0 = Tensor(rng.normal(size=(1, 2, 4)))
        with pytest.raises(ValueError):
            route(h0, ops.index(h0, (slice(None), 1)), np.ones((1, 2), dtype=bool), RoutingVariant.SUMMARY_VECTOR)


def test_adapter_forward_shape(rng):
    store = ParamStore.from_arrays({
        "a.down.weight": rng.normal(size=(4, 2)), "a.down.bias": np.zeros(2),
        "a.up.weight": rng.normal(size=(2, 4)), "a.up.bias": np.zeros(4),
    })
    out = adapter_forward(store.tensors(False), "a", Tensor(rng.normal(size=(1, 3, 4))))
    assert out.shape == (1, 3, 4)


def test_lidconcat_appends_mask_to_every_frame(rng):
    features = rng.normal(size=(2, 5, 3))
    masks = np.array([[True, False], [True, True]])
    out = lidconcat_augment(features, masks)
    assert out.shape == (2, 5, 5)
    np.testing.assert_array_equal(out[..., :3], features)
    assert np.all(out[0, :, 3:] == [1.0, 0.0]) and np.all(out[1, :, 3:] == [1.0, 1.0])
