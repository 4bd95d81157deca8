from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from nn.tensor import Tensor
from utils.exceptions import InvalidArgumentError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or self.eps <= 0:
            raise InvalidArgumentError(f"Adam hyperparameters out of range: lr={self.lr}, beta1={self.beta1}, "
                                       f"beta2={self.beta2}, eps={self.eps}")


def adam_step(params: Dict[str, Tensor], state: AdamState) -> None:
    """
    One bias-corrected Adam update, in place. Parameters without a gradient are left alone.
    Gradients are not cleared; call zero_grad() on the model before the next backward pass.
    """
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, p in params.items():
        if p.grad is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * p.grad ** 2
        p.value = p.value - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
