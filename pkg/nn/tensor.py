"""
Reverse-mode automatic differentiation over numpy arrays.

Every op builds its output with apply_op(), handing over the parents and a backward function that maps the
output gradient to one gradient per parent. Tensor.backward() walks the recorded graph in reverse topological
order and accumulates gradients into the leaves that require them.
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from utils.exceptions import InvalidArgumentError, OutOfRangeError

_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """float64 (default) or float32; applies to tensors created afterwards"""
    global _DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float64, np.float32):
        raise InvalidArgumentError(f"Tensors are float64 or float32, got {dtype}")
    _DTYPE = dtype


def get_default_dtype():
    return _DTYPE


class Tensor:
    """
    An n-dimensional value with an optional gradient.
    `grad` is filled by backward() on leaves created with requires_grad=True and accumulates until zero_grad().
    """

    def __init__(self, value, requires_grad: bool = False, name: str = None):
        self.value = np.array(value, dtype=_DTYPE) if not isinstance(value, np.ndarray) or value.dtype != _DTYPE \
            else value
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self.init = None                        # initialization rule, set by layers
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable] = None
        self.op = "leaf"

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}{', grad' if self.requires_grad else ''})"

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def backward(self, grad=None) -> None:
        """
        Accumulate d(self)/d(leaf) into every leaf that requires a gradient.

        :param grad: Gradient of the final objective w.r.t. self; defaults to 1 for a scalar
        """
        if grad is None:
            if self.value.size != 1:
                raise InvalidArgumentError(f"backward() without a gradient needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.value)
        grads = {id(self): np.asarray(grad, dtype=self.value.dtype)}
        for node in reversed(_topological_order(self)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, parent_grad in zip(node._parents, node._backward(g)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    # operator sugar; the ops live in nn.ops
    def __add__(self, other):
        from nn.ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from nn.ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from nn.ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from nn.ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from nn.ops import mul
        return mul(self, -1.0)

    def __matmul__(self, other):
        from nn.ops import matmul
        return matmul(self, other)

    def __getitem__(self, index):
        from nn.ops import take
        return take(self, index)

    def reshape(self, *shape):
        from nn.ops import reshape
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)


def _topological_order(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def apply_op(value: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    """
    Wrap the result of a forward computation into a graph node.

    :param value:       Forward result
    :param parents:     Input tensors, in the order backward() returns their gradients
    :param backward:    g -> tuple of gradients (or None) for each parent
    :param op:          Op name, used in error messages
    :return:            Output Tensor, attached to the graph when any parent requires a gradient
    """
    if not np.all(np.isfinite(value)):
        raise OutOfRangeError(f"{op} produced non-finite values")
    out = Tensor(value)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out
