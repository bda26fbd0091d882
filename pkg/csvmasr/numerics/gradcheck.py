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
Analytic gradients and their finite-difference oracle

A program is any callable taking a name -> Tensor mapping and returning a
scalar Tensor. value_and_grad runs it once with gradient-carrying leaves;
finite_diff_grad perturbs every trainable entry with central differences.
"""

from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from csvmasr.errors import ShapeError
from csvmasr.numerics.params import ParamStore
from csvmasr.numerics.tensor import Tensor

Program = Callable[[Mapping[str, Tensor]], Tensor]


def value_and_grad(program: Program, params: ParamStore) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Evaluate program and its gradient w.r.t. every trainable parameter

    Args:
        program: Scalar-valued computation over named tensors
        params: Parameter values

    Returns:
        (value, {name: gradient}) with gradients shaped like the parameters

    Raises:
        ShapeError: If the program output is not a scalar
        NumericsError: If any op produced NaN/Inf (names the op)
    """
    leaves = params.tensors(requires_grad=True)
    output = program(leaves)
    if output.size != 1:
        raise ShapeError("value_and_grad", f"program must return a scalar, got shape {output.shape}")
    output.backward()

    grads = {}
    for name in params.trainable_names():
        grad = leaves[name].grad
        grads[name] = np.zeros_like(params[name]) if grad is None else np.asarray(grad, dtype=np.float64)
    return output.item(), grads


def finite_diff_grad(
    program: Program,
    params: ParamStore,
    epsilon: float = 1e-4,
) -> Dict[str, np.ndarray]:
    """
    Central-difference gradient for every trainable parameter entry

    Args:
        program: Scalar-valued computation over named tensors
        params: Parameter values (not modified)
        epsilon: Perturbation size, must be positive

    Returns:
        {name: gradient estimate}
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    constants = params.tensors(requires_grad=False)
    grads = {}
    for name in params.trainable_names():
        base = params[name]
        grad = np.zeros_like(base)
        for position in np.ndindex(base.shape):
            shifted = base.copy()
            shifted[position] = base[position] + epsilon
            constants[name] = Tensor(shifted)
            upper = program(constants).item()
            shifted[position] = base[position] - epsilon
            constants[name] = Tensor(shifted)
            lower = program(constants).item()
            grad[position] = (upper - lower) / (2.0 * epsilon)
        constants[name] = Tensor(base)
        grads[name] = grad
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """
    Max-norm relative error of one gradient tensor

    ||a - n||_inf / max(||a||_inf, ||n||_inf, floor): entries that are tiny
    compared with the tensor's scale do not dominate the comparison.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def compare_gradients(
    analytic: Mapping[str, np.ndarray],
    numeric: Mapping[str, np.ndarray],
    floor: float = 1e-8,
) -> Dict[str, float]:
    """Per-parameter relative error between two gradient maps"""
    return {name: max_relative_error(analytic[name], numeric[name], floor) for name in analytic}
