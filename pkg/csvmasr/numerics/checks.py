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
Randomized gradient checks for every primitive op

Each case builder draws random operands and returns a scalar program
(the op's output contracted with fixed random weights) plus its parameters.
Shared by the test-suite and the `gradcheck` CLI subcommand.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from csvmasr.numerics import ops
from csvmasr.numerics.gradcheck import Program, compare_gradients, finite_diff_grad, value_and_grad
from csvmasr.numerics.params import ParamStore
from csvmasr.numerics.tensor import precision

CaseBuilder = Callable[[np.random.Generator], Tuple[Program, ParamStore]]


@dataclass
class CheckResult:
    """Outcome of one named gradient check"""
    name: str
    cases: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _contract(out, weights: np.ndarray):
    return ops.sum(ops.mul(out, weights))


def _store(**arrays) -> ParamStore:
    return ParamStore.from_arrays(arrays)


def _matmul_case(rng):
    weights = rng.normal(size=(2, 3, 5))
    return (
        lambda p: _contract(ops.matmul(p["a"], p["b"]), weights),
        _store(a=rng.normal(size=(2, 3, 4)), b=rng.normal(size=(4, 5))),
    )


def _add_case(rng):
    weights = rng.normal(size=(3, 4))
    return (
        lambda p: _contract(ops.add(p["a"], p["b"]), weights),
        _store(a=rng.normal(size=(3, 4)), b=rng.normal(size=(4,))),
    )


def _mul_case(rng):
    weights = rng.normal(size=(3, 4))
    return (
        lambda p: _contract(ops.mul(p["a"], p["b"]), weights),
        _store(a=rng.normal(size=(3, 4)), b=rng.normal(size=(3, 1))),
    )


def _layer_norm_case(rng):
    weights = rng.normal(size=(3, 5))
    return (
        lambda p: _contract(ops.layer_norm(p["x"], p["gamma"], p["beta"]), weights),
        _store(
            x=rng.normal(size=(3, 5)),
            gamma=rng.normal(1.0, 0.3, size=5),
            beta=rng.normal(size=5),
        ),
    )


def _masked_softmax_case(rng):
    mask = rng.random((3, 4)) < 0.6
    mask[np.arange(3), rng.integers(0, 4, size=3)] = True
    weights = rng.normal(size=(3, 4))
    return (
        lambda p: _contract(ops.masked_softmax(p["x"], mask), weights),
        _store(x=rng.normal(size=(3, 4))),
    )


def _logsumexp_case(rng):
    weights = rng.normal(size=(3,))
    return (
        lambda p: _contract(ops.logsumexp(p["x"], axis=-1), weights),
        _store(x=rng.normal(size=(3, 5))),
    )


def _depthwise_conv_case(rng):
    kernel = int(rng.choice([1, 3, 5]))
    weights = rng.normal(size=(2, 6, 3))
    return (
        lambda p: _contract(ops.depthwise_conv1d(p["x"], p["w"], p["b"]), weights),
        _store(
            x=rng.normal(size=(2, 6, 3)),
            w=rng.normal(size=(kernel, 3)),
            b=rng.normal(size=3),
        ),
    )


def _swish_case(rng):
    weights = rng.normal(size=(3, 4))
    return (
        lambda p: _contract(ops.swish(p["x"]), weights),
        _store(x=rng.normal(0.0, 2.0, size=(3, 4))),
    )


def _glu_case(rng):
    weights = rng.normal(size=(3, 3))
    return (
        lambda p: _contract(ops.glu(p["x"]), weights),
        _store(x=rng.normal(size=(3, 6))),
    )


def _embedding_case(rng):
    ids = rng.integers(0, 5, size=(2, 3))
    weights = rng.normal(size=(2, 3, 4))
    return (
        lambda p: _contract(ops.embedding(p["table"], ids), weights),
        _store(table=rng.normal(size=(5, 4))),
    )


def _cross_entropy_case(rng):
    targets = rng.integers(0, 5, size=4)
    weights = rng.random(4)
    return (
        lambda p: _contract(ops.cross_entropy(p["logits"], targets), weights),
        _store(logits=rng.normal(0.0, 2.0, size=(4, 5))),
    )


def _structural_case(rng):
    weights = rng.normal(size=(4, 3))

    def program(p):
        x = ops.transpose(ops.reshape(p["x"], (3, 2, 2)), (1, 0, 2))
        joined = ops.concat([ops.reshape(x, (2, 6)), p["y"]], axis=0)
        picked = ops.index(joined, (slice(None), slice(1, 4)))
        return ops.sum(ops.mul(picked, weights)) + ops.sum(p["x"], axis=0)[1]

    return program, _store(x=rng.normal(size=(3, 4)), y=rng.normal(size=(2, 6)))


PRIMITIVE_CASES: Dict[str, CaseBuilder] = {
    "matmul": _matmul_case,
    "add": _add_case,
    "mul": _mul_case,
    "layer_norm": _layer_norm_case,
    "masked_softmax": _masked_softmax_case,
    "logsumexp": _logsumexp_case,
    "depthwise_conv1d": _depthwise_conv_case,
    "swish": _swish_case,
    "glu": _glu_case,
    "embedding": _embedding_case,
    "cross_entropy": _cross_entropy_case,
    "structural": _structural_case,
}


def check_case_builder(
    name: str,
    builder: CaseBuilder,
    cases: int = 100,
    seed: int = 0,
    epsilon: float = 1e-4,
    tolerance: float = 1e-5,
) -> CheckResult:
    """Run one builder over `cases` random draws in 64-bit and keep the worst error"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    with precision(64):
        for _ in range(cases):
            program, params = builder(rng)
            _, analytic = value_and_grad(program, params)
            numeric = finite_diff_grad(program, params, epsilon)
            errors = compare_gradients(analytic, numeric)
            worst = max(worst, max(errors.values()))
    return CheckResult(name=name, cases=cases, max_error=worst, tolerance=tolerance)


def run_primitive_checks(
    cases: int = 100,
    seed: int = 0,
    epsilon: float = 1e-4,
    tolerance: float = 1e-5,
) -> List[CheckResult]:
    """Check every entry of PRIMITIVE_CASES"""
    return [
        check_case_builder(name, builder, cases, seed + offset, epsilon, tolerance)
        for offset, (name, builder) in enumerate(PRIMITIVE_CASES.items())
    ]
