"""
Parameter containers and the layers the trajectory networks are built from.

Layers allocate their parameters as zero Tensors tagged with an initialization rule; init_parameters() fills
them from a stream derived from the seed and the parameter's dotted name, so two models sharing parameter names
start from identical values.
"""

from typing import Dict, Iterator, List, Tuple

import numpy as np

from nn import ops
from nn.tensor import Tensor, get_default_dtype
from utils import derive_rng
from utils.exceptions import ShapeMismatchError, CheckpointError

FORGET_BIAS = 1.0


def parameter(shape, init=("zeros",)) -> Tensor:
    p = Tensor(np.zeros(shape, dtype=get_default_dtype()), requires_grad=True)
    p.init = init
    return p


class Module:
    """Registers Tensor parameters and child modules assigned as attributes"""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, key, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[key] = value
        elif isinstance(value, Module):
            self._modules[key] = value
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, module in self._modules.items():
            yield from module.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()
        for module in self._modules.values():
            module.zero_grad()

    def state(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise CheckpointError(f"Parameter names differ: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise CheckpointError(f"Parameter {name}: stored shape {state[name].shape} != {p.shape}")
            p.value = np.array(state[name], dtype=get_default_dtype())

    def n_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters().values()))


class ModuleList(Module):
    def __init__(self, modules: List[Module]):
        super().__init__()
        self.items = list(modules)
        for k, module in enumerate(self.items):
            self._modules[str(k)] = module

    def __getitem__(self, k: int) -> Module:
        return self.items[k]

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def init_parameters(module: Module, seed: int) -> None:
    """Fill every parameter according to its rule: uniform(fan_in), zeros, const(value) or lstm_bias(hidden)"""
    for name, p in module.named_parameters():
        rule = p.init or ("zeros",)
        if rule[0] == "uniform":
            bound = np.sqrt(3.0 / rule[1])
            p.value = derive_rng(seed, "init", name).uniform(-bound, bound, p.shape).astype(get_default_dtype())
        elif rule[0] == "lstm_bias":
            hidden = rule[1]
            p.value = np.zeros(p.shape, dtype=get_default_dtype())
            p.value[hidden:2 * hidden] = FORGET_BIAS
        elif rule[0] == "const":
            p.value = np.full(p.shape, rule[1], dtype=get_default_dtype())
        else:
            p.value = np.zeros(p.shape, dtype=get_default_dtype())


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, bias: bool = True):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.weight = parameter((n_in, n_out), ("uniform", n_in))
        self.bias = parameter((n_out,)) if bias else None

    def __call__(self, x) -> Tensor:
        if x.shape[-1] != self.n_in:
            raise ShapeMismatchError(f"Linear({self.n_in}, {self.n_out}) got input of shape {x.shape}")
        out = ops.matmul(x, self.weight)
        return out if self.bias is None else ops.add(out, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int = 1, padding: int = 0, groups: int = 1,
                 bias: bool = True):
        super().__init__()
        self.stride, self.padding, self.groups = stride, padding, groups
        fan_in = (c_in // groups) * kernel * kernel
        self.weight = parameter((c_out, c_in // groups, kernel, kernel), ("uniform", fan_in))
        self.bias = parameter((c_out,)) if bias else None

    def __call__(self, x) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class MLP(Module):
    """Linear layers with relu between them (none after the last)"""

    def __init__(self, sizes: List[int]):
        super().__init__()
        self.layers = ModuleList([Linear(a, b) for a, b in zip(sizes[:-1], sizes[1:])])

    def __call__(self, x) -> Tensor:
        for k, layer in enumerate(self.layers):
            x = layer(x)
            if k < len(self.layers) - 1:
                x = ops.relu(x)
        return x


def lstm_step(x, h, c, w_x: Tensor, w_h: Tensor, b: Tensor) -> Tuple[Tensor, Tensor]:
    """
    One LSTM cell update. Gates are packed as [input, forget, candidate, output] along the last axis.

    :param x:   (B, D) input
    :param h:   (B, H) previous hidden state
    :param c:   (B, H) previous cell state
    :return:    (h', c')
    """
    hidden = w_h.shape[0]
    if x.shape[-1] != w_x.shape[0] or h.shape[-1] != hidden or c.shape[-1] != hidden:
        raise ShapeMismatchError(f"lstm_step: x {x.shape}, h {h.shape}, c {c.shape} do not fit weights "
                                 f"{w_x.shape} / {w_h.shape}")
    z = ops.add(ops.add(ops.matmul(x, w_x), ops.matmul(h, w_h)), b)
    i = ops.sigmoid(z[:, :hidden])
    f = ops.sigmoid(z[:, hidden:2 * hidden])
    g = ops.tanh(z[:, 2 * hidden:3 * hidden])
    o = ops.sigmoid(z[:, 3 * hidden:])
    c_next = ops.add(ops.mul(f, c), ops.mul(i, g))
    h_next = ops.mul(o, ops.tanh(c_next))
    return h_next, c_next


class LSTMLayer(Module):
    def __init__(self, n_in: int, hidden: int):
        super().__init__()
        self.hidden = hidden
        self.w_x = parameter((n_in, 4 * hidden), ("uniform", n_in))
        self.w_h = parameter((hidden, 4 * hidden), ("uniform", hidden))
        self.b = parameter((4 * hidden,), ("lstm_bias", hidden))


class LSTM(Module):
    """Stacked LSTM; layer l's hidden sequence is layer l+1's input"""

    def __init__(self, n_in: int, hidden: int, n_layers: int = 3):
        super().__init__()
        self.n_in, self.hidden = n_in, hidden
        self.layers = ModuleList([LSTMLayer(n_in if k == 0 else hidden, hidden) for k in range(n_layers)])

    def __call__(self, sequence: List[Tensor]) -> Tensor:
        return lstm_forward(sequence, self.layers)


def lstm_forward(sequence: List[Tensor], layers: ModuleList) -> Tensor:
    """
    Run a stacked LSTM over a sequence of (B, D) inputs from zero state.

    :return: Final hidden state of the top layer, (B, H)
    """
    if not sequence:
        raise ShapeMismatchError("lstm_forward needs a non-empty sequence")
    batch = sequence[0].shape[0]
    inputs = list(sequence)
    for layer in layers:
        h = c = Tensor(np.zeros((batch, layer.hidden), dtype=get_default_dtype()))
        outputs = []
        for x in inputs:
            h, c = lstm_step(x, h, c, layer.w_x, layer.w_h, layer.b)
            outputs.append(h)
        inputs = outputs
    return inputs[-1]
