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
Tensor - reverse-mode differentiable array

A Tensor wraps an immutable numpy array. Operations (see ops.py) build a
graph only when at least one operand requires a gradient, so inference on
constant parameters records nothing.

Usage:
    from csvmasr.numerics import Tensor, ops

    x = Tensor([3.0], requires_grad=True)
    y = ops.sum(ops.mul(x, x))
    y.backward()
    print(x.grad)  # [6.]
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from csvmasr.errors import NumericsError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_DTYPES = {32: np.float32, 64: np.float64}

# Graphs are confined to one thread, so precision and finiteness checks are too
_local = threading.local()


def get_precision() -> int:
    """Current floating point width in bits (32 or 64)"""
    return getattr(_local, "precision", 64)


def set_precision(bits: int):
    """Select 32- or 64-bit arithmetic for tensors created on this thread"""
    if bits not in _DTYPES:
        raise ValueError(f"precision must be 32 or 64, got {bits}")
    _local.precision = bits


def get_dtype() -> np.dtype:
    return np.dtype(_DTYPES[get_precision()])


@contextmanager
def precision(bits: int) -> Iterator[None]:
    """Temporarily switch precision"""
    previous = get_precision()
    set_precision(bits)
    try:
        yield
    finally:
        set_precision(previous)


@contextmanager
def finite_checks(enabled: bool) -> Iterator[None]:
    """Enable or disable the per-op NaN/Inf check (enabled by default)"""
    previous = getattr(_local, "check_finite", True)
    _local.check_finite = enabled
    try:
        yield
    finally:
        _local.check_finite = previous


def _checking_finite() -> bool:
    return getattr(_local, "check_finite", True)


class Tensor:
    """
    Immutable array node in a reverse-mode computation graph

    Attributes:
        data: Read-only numpy array (row-major, current precision)
        requires_grad: Whether gradients flow to this tensor
        grad: Accumulated gradient after backward() (leaves only)
        op: Name of the operation that produced this tensor
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    # numpy defers to the reflected operators below instead of broadcasting over the object
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        array = np.array(data, dtype=get_dtype())
        array.flags.writeable = False
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.op = op
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        """
        Create the output node of an operation

        Args:
            data: Forward result
            parents: Operand tensors
            backward: Maps the output gradient to one gradient per parent
                (None for parents that need none)
            op: Operation name, reported on numeric failure

        Returns:
            New tensor, linked into the graph if any parent requires grad
        """
        array = np.asarray(data, dtype=get_dtype())
        if _checking_finite() and not np.all(np.isfinite(array)):
            raise NumericsError(op)
        array.flags.writeable = False

        node = cls.__new__(cls)
        node.data = array
        node.grad = None
        node.op = op
        node.requires_grad = any(p.requires_grad for p in parents)
        if node.requires_grad:
            node._parents = tuple(parents)
            node._backward = backward
        else:
            node._parents = ()
            node._backward = None
        return node

    # ------------------------------------------------------------------
    # Array-like accessors
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------------
    # Operators (delegate to ops)
    # ------------------------------------------------------------------

    def __add__(self, other):
        from csvmasr.numerics import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from csvmasr.numerics import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from csvmasr.numerics import ops
        return ops.mul(self, -1.0)

    def __sub__(self, other):
        from csvmasr.numerics import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from csvmasr.numerics import ops
        return ops.sub(other, self)

    def __matmul__(self, other):
        from csvmasr.numerics import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from csvmasr.numerics import ops
        return ops.index(self, index)

    def reshape(self, *shape):
        from csvmasr.numerics import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from csvmasr.numerics import ops
        return ops.transpose(self, axes if axes else None)

    def sum(self, axis=None, keepdims: bool = False):
        from csvmasr.numerics import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    # ------------------------------------------------------------------
    # Reverse pass
    # ------------------------------------------------------------------

    def backward(self):
        """
        Accumulate d(self)/d(leaf) into every reachable leaf's .grad

        Raises:
            ShapeError: If self is not a scalar
        """
        if self.data.size != 1:
            raise ShapeError("backward", f"output must be scalar, got shape {self.shape}")

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in pending:
                    pending[key] = pending[key] + parent_grad
                else:
                    pending[key] = parent_grad


def _topological_order(root: Tensor) -> list:
    # Iterative post-order DFS; graphs of a full model are deeper than the recursion limit
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    """Wrap a constant (number or array) as a non-differentiable tensor"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad
