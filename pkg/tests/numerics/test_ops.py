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

from csvmasr.errors import InvalidMaskError, NumericsError, ShapeError
from csvmasr.numerics import ParamStore, Tensor, finite_checks, ops, precision, value_and_grad


class TestMaskedSoftmax:
    def test_reference_values(self):
        out = ops.masked_softmax(np.array([1.0, 2.0, 3.0]), np.array([True, False, True])).data
        np.testing.assert_allclose(out, [0.11920292, 0.0, 0.88079708], atol=1e-8)
        assert out[1] == 0.0

    def test_single_active_entry_is_exactly_one(self):
        out = ops.masked_softmax(np.array([5.0, -3.0, 0.25]), np.array([False, True, False])).data
        assert out.tolist() == [0.0, 1.0, 0.0]

    def test_random_cases_exact_zeros_and_masked_logit_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            size = int(rng.integers(1, 8))
            mask = rng.random(size) < 0.5
            mask[rng.integers(size)] = True
            logits = rng.normal(scale=5.0, size=size)
            out = ops.masked_softmax(logits, mask).data

            assert np.all(out[~mask] == 0.0)
            assert abs(out.sum() - 1.0) < 1e-12

            scrambled = logits.copy()
            scrambled[~mask] = rng.normal(scale=100.0, size=(~mask).sum())
            assert np.array_equal(ops.masked_softmax(scrambled, mask).data, out)

    def test_empty_mask_rejected(self):
        with pytest.raises(InvalidMaskError):
            ops.masked_softmax(np.zeros(3), np.zeros(3, dtype=bool))


class TestElementwise:
    def test_layer_norm_normalizes_last_axis(self, rng):
        x = rng.normal(size=(4, 5))
        out = ops.layer_norm(x, np.ones(5), np.zeros(5)).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-3)

    def test_depthwise_conv_identity_kernel(self, rng):
        x = rng.normal(size=(2, 5, 3))
        weight = np.zeros((3, 3))
        weight[1] = 1.0
        np.testing.assert_array_equal(ops.depthwise_conv1d(x, weight, np.zeros(3)).data, x)

    def test_depthwise_conv_rejects_even_kernel(self):
        with pytest.raises(ShapeError):
            ops.depthwise_conv1d(np.zeros((4, 2)), np.zeros((2, 2)), np.zeros(2))

    def test_glu_halves_last_axis(self):
        out = ops.glu(np.array([[2.0, 0.0]]), axis=-1).data
        np.testing.assert_allclose(out, [[1.0]])

    def test_cross_entropy_uniform(self):
        nll = ops.cross_entropy(np.zeros((2, 4)), np.array([0, 3])).data
        np.testing.assert_allclose(nll, np.log(4.0))

    def test_embedding_out_of_range(self):
        with pytest.raises(ShapeError):
            ops.embedding(np.zeros((3, 2)), np.array([3]))


class TestGraph:
    def test_value_and_grad_square(self):
        store = ParamStore()
        store.add("x", np.array([3.0]))
        value, grads = value_and_grad(lambda p: ops.sum(ops.mul(p["x"], p["x"])), store)
        assert value == 9.0
        np.testing.assert_allclose(grads["x"], [6.0])

    def test_shared_node_accumulates_gradient(self):
        store = ParamStore.from_arrays({"x": np.array([2.0])})

        def program(p):
            y = ops.mul(p["x"], 3.0)
            return ops.sum(ops.add(y, y))

        _, grads = value_and_grad(program, store)
        np.testing.assert_allclose(grads["x"], [6.0])

    def test_non_scalar_program_rejected(self):
        store = ParamStore.from_arrays({"x": np.ones(3)})
        with pytest.raises(ShapeError):
            value_and_grad(lambda p: ops.mul(p["x"], 2.0), store)

    def test_overflow_names_the_op(self):
        with pytest.raises(NumericsError) as excinfo:
            ops.mul(Tensor(1e308), 10.0)
        assert excinfo.value.op_name == "mul"

    def test_finite_checks_can_be_disabled(self):
        with finite_checks(False):
            out = ops.mul(Tensor(1e308), 10.0)
        assert np.isinf(out.data)

    def test_precision_switch(self):
        with precision(32):
            assert Tensor([1.0]).data.dtype == np.float32
        assert Tensor([1.0]).data.dtype == np.float64

    def test_tensors_are_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0
