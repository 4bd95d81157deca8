"""
Differentiable ops on Tensors. Each op computes its forward value with numpy and registers the analytic
backward through apply_op().
"""

from typing import Sequence

import numpy as np

from nn.tensor import Tensor, apply_op, as_tensor
from utils.exceptions import ShapeMismatchError, InvalidArgumentError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return apply_op(a.value + b.value, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)
    return apply_op(a.value - b.value, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)
    return apply_op(a.value * b.value, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    """(..., n, k) @ (k, m) or batched (..., n, k) @ (..., k, m)"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")

    def backward(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return apply_op(a.value @ b.value, (a, b), backward, "matmul")


def exp(a) -> Tensor:
    a = as_tensor(a)
    value = np.exp(a.value)
    return apply_op(value, (a,), lambda g: (g * value,), "exp")


def square(a) -> Tensor:
    a = as_tensor(a)
    return apply_op(a.value ** 2, (a,), lambda g: (2.0 * a.value * g,), "square")


def clip(a, low: float, high: float) -> Tensor:
    """Clamp to [low, high]; the gradient is zero where the clamp is active"""
    a = as_tensor(a)
    inside = (a.value > low) & (a.value < high)
    return apply_op(np.clip(a.value, low, high), (a,), lambda g: (g * inside,), "clip")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:   # noqa: A001
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.shape).copy(),
    return apply_op(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else int(np.prod([a.shape[k] for k in np.atleast_1d(axis)]))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g / count, a.shape).copy(),
    return apply_op(np.mean(a.value, axis=axis, keepdims=keepdims), (a,), backward, "mean")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return apply_op(a.value * mask, (a,), lambda g: (g * mask,), "relu")


def relu6(a) -> Tensor:
    a = as_tensor(a)
    mask = (a.value > 0) & (a.value < 6)
    return apply_op(np.clip(a.value, 0.0, 6.0), (a,), lambda g: (g * mask,), "relu6")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign so large magnitudes never overflow exp
    x = a.value
    z = np.exp(-np.abs(x))
    value = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return apply_op(value, (a,), lambda g: (g * value * (1.0 - value),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    value = np.tanh(a.value)
    return apply_op(value, (a,), lambda g: (g * (1.0 - value ** 2),), "tanh")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.value - np.max(a.value, axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return value * (g - np.sum(g * value, axis=axis, keepdims=True)),
    return apply_op(value, (a,), backward, "softmax")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise InvalidArgumentError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[k] != tensors[0].shape[k] for k in range(ndim) if k != axis):
            raise ShapeMismatchError(f"concat on axis {axis}: shapes {tensors[0].shape} and {t.shape} differ")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))
    return apply_op(np.concatenate([t.value for t in tensors], axis=axis), tensors, backward, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeMismatchError(f"stack: shapes {tensors[0].shape} and {t.shape} differ")

    def backward(g):
        return tuple(np.take(g, k, axis=axis) for k in range(len(tensors)))
    return apply_op(np.stack([t.value for t in tensors], axis=axis), tensors, backward, "stack")


def take(a, index) -> Tensor:
    """Basic or integer-array indexing (slice)"""
    a = as_tensor(a)
    try:
        value = a.value[index]
    except IndexError as e:
        raise ShapeMismatchError(f"slice {index!r} does not fit shape {a.shape}: {e}")

    def backward(g):
        out = np.zeros_like(a.value)
        np.add.at(out, index, g)
        return out,
    return apply_op(np.array(value), (a,), backward, "slice")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.value.reshape(shape)
    except ValueError:
        raise ShapeMismatchError(f"reshape: cannot reshape {a.shape} into {tuple(shape)}")
    return apply_op(value, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    inverse = np.argsort(axes)
    return apply_op(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inverse),), "transpose")


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """
    Grouped 2D cross-correlation.

    :param x:       (N, C_in, H, W) or (C_in, H, W)
    :param weight:  (C_out, C_in / groups, k, k)
    :param bias:    (C_out,) or None
    :return:        (N, C_out, H', W') (or (C_out, H', W')) with H' = (H + 2*padding - k) // stride + 1
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim == 3:
        out = conv2d(reshape(x, (1,) + x.shape), weight, bias, stride, padding, groups)
        return reshape(out, out.shape[1:])
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeMismatchError(f"conv2d: input {x.shape} and kernels {weight.shape} must be 4D")
    n, c_in, h, w = x.shape
    c_out, c_group, k, k2 = weight.shape
    if k != k2:
        raise ShapeMismatchError(f"conv2d: kernels must be square, got {weight.shape}")
    if c_in % groups or c_out % groups or c_in // groups != c_group:
        raise ShapeMismatchError(f"conv2d: input {x.shape} and kernels {weight.shape} do not fit groups={groups}")
    h_out, w_out = conv_output_size(h, k, stride, padding), conv_output_size(w, k, stride, padding)
    if h_out < 1 or w_out < 1 or stride < 1:
        raise ShapeMismatchError(f"conv2d: input {x.shape} with kernel {k}, stride {stride}, padding {padding} "
                                 f"gives output {h_out}x{w_out}")

    padded = np.pad(x.value, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    kernels = weight.value.reshape(groups, c_out // groups, c_group, k, k)

    def window(array, i, j):
        return array[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride]

    # one kernel offset at a time keeps memory at the size of the output
    value = np.zeros((n, groups, c_out // groups, h_out, w_out), dtype=padded.dtype)
    for i in range(k):
        for j in range(k):
            shifted = window(padded, i, j).reshape(n, groups, c_group, h_out, w_out)
            value += np.einsum("ngchw,goc->ngohw", shifted, kernels[..., i, j], optimize=True)
    value = value.reshape(n, c_out, h_out, w_out)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ShapeMismatchError(f"conv2d: bias {bias.shape} does not match {c_out} output channels")
        value = value + bias.value[None, :, None, None]
        parents = (x, weight, bias)

    def backward(g):
        g_groups = g.reshape(n, groups, c_out // groups, h_out, w_out)
        g_kernels = np.zeros_like(kernels)
        g_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                shifted = window(padded, i, j).reshape(n, groups, c_group, h_out, w_out)
                g_kernels[..., i, j] = np.einsum("ngohw,ngchw->goc", g_groups, shifted, optimize=True)
                g_shifted = np.einsum("ngohw,goc->ngchw", g_groups, kernels[..., i, j], optimize=True)
                window(g_padded, i, j)[...] += g_shifted.reshape(n, c_in, h_out, w_out)
        grads = (g_padded[:, :, padding:padding + h, padding:padding + w], g_kernels.reshape(weight.shape))
        if bias is not None:
            grads += (g.sum(axis=(0, 2, 3)),)
        return grads
    return apply_op(value, parents, backward, "conv2d")
