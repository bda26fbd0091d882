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
Minimal reverse-mode tensor engine

Usage:
    from csvmasr.numerics import ParamStore, value_and_grad, finite_diff_grad, ops

    store = ParamStore()
    store.add("x", np.array([3.0]))
    value, grads = value_and_grad(lambda p: ops.sum(ops.mul(p["x"], p["x"])), store)
    # value == 9.0, grads["x"] == [6.0]
"""

from csvmasr.numerics import ops
from csvmasr.numerics.gradcheck import (
    Program,
    compare_gradients,
    finite_diff_grad,
    max_relative_error,
    value_and_grad,
)
from csvmasr.numerics.params import ParamStore
from csvmasr.numerics.tensor import (
    Tensor,
    as_tensor,
    finite_checks,
    get_dtype,
    get_precision,
    precision,
    set_precision,
)

__all__ = [
    "ops",
    "Program",
    "ParamStore",
    "Tensor",
    "as_tensor",
    "compare_gradients",
    "finite_checks",
    "finite_diff_grad",
    "get_dtype",
    "get_precision",
    "max_relative_error",
    "precision",
    "set_precision",
    "value_and_grad",
]
