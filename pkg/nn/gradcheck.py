"""
Finite-difference verification of the analytic gradients.
"""

from typing import Callable, List, Sequence

import numpy as np
import pandas as pd

from logger.logger import logger
from nn import ops
from nn.layers import LSTM, init_parameters, lstm_step
from nn.tensor import Tensor, get_default_dtype, set_default_dtype
from utils import derive_rng
from utils.exceptions import InvalidArgumentError

LINEAR_TOLERANCE = 1e-6
NONLINEAR_TOLERANCE = 1e-4


def grad_check(function: Callable[..., Tensor], inputs: Sequence, eps: float = 1e-5) -> float:
    """
    Compare autodiff gradients of a scalar function with central differences.

    :param function:    f(*tensors) -> scalar Tensor
    :param inputs:      Arrays (or Tensors) the gradient is taken with respect to
    :param eps:         Finite-difference step
    :return:            Max relative error over all coordinates of all inputs. A coordinate's error is
                        |analytic - numeric| / max(|analytic|, |numeric|, 1e-6 * largest gradient magnitude),
                        so coordinates with vanishing gradients are compared on the scale of the whole gradient
    """
    previous = get_default_dtype()
    set_default_dtype(np.float64)
    try:
        leaves = [Tensor(np.array(x.value if isinstance(x, Tensor) else x, dtype=np.float64), requires_grad=True)
                  for x in inputs]
        out = function(*leaves)
        if out.value.size != 1:
            raise InvalidArgumentError(f"grad_check needs a scalar function, got shape {out.shape}")
        out.backward()
        analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]

        numeric = []
        for leaf in leaves:
            estimate = np.zeros_like(leaf.value)
            flat, flat_estimate = leaf.value.reshape(-1), estimate.reshape(-1)
            for k in range(flat.size):
                original = flat[k]
                flat[k] = original + eps
                plus = float(function(*[Tensor(x.value) for x in leaves]).value)
                flat[k] = original - eps
                minus = float(function(*[Tensor(x.value) for x in leaves]).value)
                flat[k] = original
                flat_estimate[k] = (plus - minus) / (2 * eps)
            numeric.append(estimate)
    finally:
        set_default_dtype(previous)

    scale = max([np.max(np.abs(a), initial=0.0) for a in analytic]
                + [np.max(np.abs(n), initial=0.0) for n in numeric])
    floor = max(1e-6 * scale, 1e-12)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor))))
    return worst


def _weighted_sum(rng):
    """Projects an output on fixed random weights (one draw per shape) so every coordinate reaches the scalar"""
    weights = {}

    def reduce(t: Tensor) -> Tensor:
        if t.shape not in weights:
            weights[t.shape] = rng.normal(size=t.shape)
        return ops.sum(ops.mul(t, weights[t.shape]))
    return reduce


def op_cases(seed: int) -> List[tuple]:
    """(name, function, inputs, tolerance) for every differentiable op"""
    rng = derive_rng(seed, "gradcheck")
    reduce = _weighted_sum(rng)
    # keep relu inputs away from the kink
    away = rng.normal(size=(3, 5))
    away = np.where(np.abs(away) < 0.05, 0.3, away)
    lstm = LSTM(3, 4, n_layers=3)
    init_parameters(lstm, seed)
    sequence = rng.normal(size=(12, 2, 3))
    target = np.full((1, 5), 0.2)

    return [
        ("matmul", lambda a, b: reduce(ops.matmul(a, b)), [rng.normal(size=(3, 4)), rng.normal(size=(4, 2))],
         LINEAR_TOLERANCE),
        ("add", lambda a, b: reduce(ops.add(a, b)), [rng.normal(size=(3, 4)), rng.normal(size=(4,))],
         LINEAR_TOLERANCE),
        ("mul", lambda a, b: reduce(ops.mul(a, b)), [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))],
         LINEAR_TOLERANCE),
        ("concat", lambda a, b: reduce(ops.concat([a, b], axis=1)), [rng.normal(size=(2, 3)),
                                                                     rng.normal(size=(2, 5))], LINEAR_TOLERANCE),
        ("sum", lambda a: reduce(ops.sum(a, axis=0)), [rng.normal(size=(4, 3))], LINEAR_TOLERANCE),
        ("mean", lambda a: reduce(ops.mean(a, axis=1)), [rng.normal(size=(4, 3))], LINEAR_TOLERANCE),
        ("slice", lambda a: reduce(a[1:3, ::2]), [rng.normal(size=(4, 5))], LINEAR_TOLERANCE),
        ("relu", lambda a: reduce(ops.relu(a)), [away], NONLINEAR_TOLERANCE),
        ("relu6", lambda a: reduce(ops.relu6(ops.mul(a, 4.0))), [away], NONLINEAR_TOLERANCE),
        ("sigmoid", lambda a: reduce(ops.sigmoid(a)), [rng.normal(size=(3, 4))], NONLINEAR_TOLERANCE),
        ("tanh", lambda a: reduce(ops.tanh(a)), [rng.normal(size=(3, 4))], NONLINEAR_TOLERANCE),
        ("softmax", lambda a: reduce(ops.softmax(a, axis=-1)), [rng.normal(size=(3, 6))], NONLINEAR_TOLERANCE),
        ("exp", lambda a: reduce(ops.exp(a)), [rng.normal(size=(3, 4))], NONLINEAR_TOLERANCE),
        ("conv2d", lambda x, w, b: reduce(ops.conv2d(x, w, b, stride=1, padding=1)),
         [rng.normal(size=(2, 8, 8)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(3,))], NONLINEAR_TOLERANCE),
        ("conv2d-depthwise", lambda x, w: reduce(ops.conv2d(x, w, stride=2, padding=1, groups=2)),
         [rng.normal(size=(2, 8, 8)), rng.normal(size=(2, 1, 3, 3))], NONLINEAR_TOLERANCE),
        ("pipeline", lambda x, w, m: _pipeline_loss(x, w, m, target),
         [rng.normal(size=(2, 6, 6)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(108, 5))], NONLINEAR_TOLERANCE),
        ("lstm", lambda x, *w: reduce(_lstm_with(lstm, w, [x[k] for k in range(x.shape[0])])),
         [sequence] + [p.value.copy() for p in lstm.parameters().values()], NONLINEAR_TOLERANCE),
    ]


def _pipeline_loss(x, w, m, target) -> Tensor:
    """conv -> relu -> matmul -> softmax -> squared error"""
    features = ops.reshape(ops.relu(ops.conv2d(x, w, padding=1)), (1, -1))
    return ops.mean(ops.square(ops.sub(ops.softmax(ops.matmul(features, m), axis=-1), target)))


def _lstm_with(lstm: LSTM, weights, sequence: List[Tensor]) -> Tensor:
    """Stacked LSTM forward using the given weight tensors instead of the module's own"""
    inputs = sequence
    for k, layer in enumerate(lstm.layers):
        w_x, w_h, b = weights[3 * k:3 * k + 3]
        h = c = Tensor(np.zeros((inputs[0].shape[0], layer.hidden)))
        outputs = []
        for x in inputs:
            h, c = lstm_step(x, h, c, w_x, w_h, b)
            outputs.append(h)
        inputs = outputs
    return inputs[-1]


def run_grad_checks(seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> pd.DataFrame:
    """
    Check every op on each seed.

    :return: DataFrame with columns op, seed, max_rel_error, tolerance, passed
    """
    rows = []
    for seed in seeds:
        for name, function, inputs, tolerance in op_cases(seed):
            error = grad_check(function, inputs)
            rows.append({"op": name, "seed": seed, "max_rel_error": error, "tolerance": tolerance,
                         "passed": error < tolerance})
            if error >= tolerance:
                logger.warning(f"Gradient check failed for {name} (seed {seed}): {error:.3g} >= {tolerance:g}")
    return pd.DataFrame(rows)
