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
Parameter store and initializers
"""

from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from csvmasr.errors import ShapeError
from csvmasr.numerics.tensor import Tensor, get_dtype


class ParamStore:
    """
    Ordered map from unique parameter name to array

    Iteration order is insertion order, so two stores built by the same
    sequence of add() calls iterate identically.

    Usage:
        store = ParamStore()
        store.add("encoder.sv", np.zeros(32))
        leaves = store.tensors()          # name -> Tensor(requires_grad=trainable)
        constants = store.tensors(False)  # inference, builds no graph
    """

    def __init__(self):
        self._values: Dict[str, np.ndarray] = {}
        self._trainable: Dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True):
        if name in self._values:
            raise ValueError(f"Duplicate parameter name: {name}")
        self._values[name] = np.array(value, dtype=np.float64)
        self._trainable[name] = trainable

    def set(self, name: str, value: np.ndarray):
        """Replace a parameter's value (shape must match)"""
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._values[name].shape:
            raise ShapeError(
                "ParamStore.set", f"{name}: shape {value.shape} != {self._values[name].shape}"
            )
        self._values[name] = value.copy()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def names(self) -> List[str]:
        return list(self._values)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._values.items())

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def trainable_names(self) -> List[str]:
        return [name for name, flag in self._trainable.items() if flag]

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def tensors(self, requires_grad: bool = True) -> Dict[str, Tensor]:
        """Wrap every parameter as a Tensor in the current precision"""
        return {
            name: Tensor(value, requires_grad=requires_grad and self._trainable[name], op=name)
            for name, value in self._values.items()
        }

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self._values.items()}

    def copy(self) -> "ParamStore":
        clone = ParamStore()
        for name, value in self._values.items():
            clone.add(name, value, self._trainable[name])
        return clone

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ParamStore":
        store = cls()
        for name, value in arrays.items():
            store.add(name, value)
        return store


# ============================================================================
# Initializers (all driven by an explicit numpy Generator)
# ============================================================================

def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=get_dtype())


def ones(shape) -> np.ndarray:
    return np.ones(shape, dtype=get_dtype())
