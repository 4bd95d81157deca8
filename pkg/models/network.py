"""
Command-conditioned trajectory networks.

A shared trunk turns each of the 12 observation frames into an image feature vector and each history point into a
motion feature vector. The command selects one of three branches, which turns the feature sequences into a
22-point trajectory (and, for the full network, a per-element log-variance).
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from models.config import NetConfig, Variant, N_COMMANDS
from nn import ops, Module, ModuleList, Linear, Conv2d, MLP, LSTM, Tensor, init_parameters
from nn.tensor import get_default_dtype
from utils.exceptions import ShapeMismatchError, InvalidArgumentError

INPUT_MEAN = 0.5


@dataclass
class ModelOutput:
    """
    trajectory: (B, 22, 3) of (v, x, y)
    log_var:    (B, 22, 3) or None for variants without uncertainty
    attention:  (B, 12) or None for variants without attention
    Fields are Tensors from forward() and arrays from predict().
    """
    trajectory: object
    log_var: object = None
    attention: object = None


class Bottleneck(Module):
    """expand 1x1 -> depthwise 3x3 -> project 1x1, relu6 after the first two, residual when shapes allow"""

    def __init__(self, c_in: int, c_out: int, stride: int, expansion: int):
        super().__init__()
        wide = c_in * expansion
        self.expand = Conv2d(c_in, wide, 1)
        self.depthwise = Conv2d(wide, wide, 3, stride=stride, padding=1, groups=wide)
        self.project = Conv2d(wide, c_out, 1)
        self.residual = stride == 1 and c_in == c_out

    def __call__(self, x: Tensor) -> Tensor:
        out = self.project(ops.relu6(self.depthwise(ops.relu6(self.expand(x)))))
        return ops.add(out, x) if self.residual else out


class FeatureExtractor(Module):
    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        self.stem = Conv2d(3, config.stem_channels, 3, stride=2, padding=1)
        blocks, c_in = [], config.stem_channels
        for c_out, stride in zip(config.block_channels, config.block_strides):
            blocks.append(Bottleneck(c_in, c_out, stride, config.expansion))
            c_in = c_out
        self.blocks = ModuleList(blocks)
        self.projection = Linear(c_in, config.f_img)

    def __call__(self, images: np.ndarray) -> Tensor:
        """
        :param images:  (N, H, W, 3) in [0, 1]
        :return:        (N, F_img)
        """
        h, w = self.config.image_size
        if images.ndim != 4 or images.shape[1:] != (h, w, 3):
            raise ShapeMismatchError(f"Expected images of shape (N, {h}, {w}, 3), got {images.shape}")
        x = Tensor(np.transpose(images, (0, 3, 1, 2)) - INPUT_MEAN)
        x = ops.relu6(self.stem(x))
        for block in self.blocks:
            x = block(x)
        return self.projection(ops.mean(x, axis=(2, 3)))


class MotionEncoder(Module):
    """3 -> F_mot -> F_mot perceptron applied to every history point"""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.mlp = MLP([3, config.f_mot, config.f_mot])

    def __call__(self, motion) -> Tensor:
        return self.mlp(motion)


class Trunk(Module):
    def __init__(self, config: NetConfig):
        super().__init__()
        self.features = FeatureExtractor(config)
        if config.variant.uses_motion:
            self.motion = MotionEncoder(config)

    def __call__(self, images: np.ndarray, motion: np.ndarray):
        """(B, 12, H, W, 3), (B, 12, 3) -> image features (B, 12, F_img), motion features (B, 12, F_mot) or None"""
        b, t = images.shape[:2]
        f_i = ops.reshape(self.features(images.reshape((b * t,) + images.shape[2:])), (b, t, -1))
        f_m = self.motion(Tensor(motion)) if "motion" in self._modules else None
        return f_i, f_m


def combine(f_i: Tensor, f_m: Tensor) -> Tensor:
    """Image features first, then motion features, along the last axis"""
    return ops.concat([f_i, f_m], axis=-1)


def attention_weights(mlp: MLP, f_c: Tensor) -> Tensor:
    """(B, 12, C) -> (B, 12) softmax weights computed from the whole flattened sequence"""
    b, t, c = f_c.shape
    return ops.softmax(mlp(ops.reshape(f_c, (b, t * c))), axis=-1)


def _sequence(x: Tensor) -> List[Tensor]:
    return [x[:, k, :] for k in range(x.shape[1])]


class TrajectoryHead(Module):
    """
    One shared hidden layer, then parallel output layers for the trajectory and (optionally) its log-variance.
    The source description ("compressed by 2 FC layers to get two vectors") can also be read as two separate
    two-layer heads; the shared hidden layer is the reading used here.
    """

    def __init__(self, n_in: int, config: NetConfig, uncertainty: bool):
        super().__init__()
        self.hidden = Linear(n_in, config.hidden)
        self.trajectory = Linear(config.hidden, config.output_size)
        if uncertainty:
            self.log_var = Linear(config.hidden, config.output_size)

    def __call__(self, x: Tensor):
        shared = ops.relu(self.hidden(x))
        log_var = self.log_var(shared) if "log_var" in self._modules else None
        return self.trajectory(shared), log_var


class RecurrentBranch(Module):
    """M0, M1, M2 (combined features) and CNN_LSTM (image features only)"""

    def __init__(self, config: NetConfig):
        super().__init__()
        variant = config.variant
        n_in = config.combined_dim if variant.uses_motion else config.f_img
        if variant.has_attention:
            self.attention = MLP([config.history * n_in, config.attention_hidden, config.history])
        self.lstm = LSTM(n_in, config.hidden, config.lstm_layers)
        self.head = TrajectoryHead(config.hidden, config, variant.has_uncertainty)

    def __call__(self, f_i: Tensor, f_m: Optional[Tensor]):
        f_c = combine(f_i, f_m) if f_m is not None else f_i
        attention = None
        if "attention" in self._modules:
            attention = attention_weights(self.attention, f_c)
            b, t = attention.shape
            f_c = ops.mul(f_c, ops.reshape(attention, (b, t, 1)))
        trajectory, log_var = self.head(self.lstm(_sequence(f_c)))
        return trajectory, log_var, attention


class TwoLSTMBranch(Module):
    """M3: image and motion sequences through separate LSTMs, final hiddens concatenated"""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.image_lstm = LSTM(config.f_img, config.hidden, config.lstm_layers)
        self.motion_lstm = LSTM(config.f_mot, config.hidden, config.lstm_layers)
        self.head = TrajectoryHead(2 * config.hidden, config, uncertainty=False)

    def __call__(self, f_i: Tensor, f_m: Tensor):
        joint = ops.concat([self.image_lstm(_sequence(f_i)), self.motion_lstm(_sequence(f_m))], axis=-1)
        trajectory, log_var = self.head(joint)
        return trajectory, log_var, None


class FCBranch(Module):
    """CNN_FC (image features) and CNNState_FC (combined features): flattened sequence through an FC stack"""

    def __init__(self, config: NetConfig):
        super().__init__()
        n_in = config.combined_dim if config.variant.uses_motion else config.f_img
        self.mlp = MLP([config.history * n_in, config.fc_width, config.fc_width, config.output_size])

    def __call__(self, f_i: Tensor, f_m: Optional[Tensor]):
        f_c = combine(f_i, f_m) if f_m is not None else f_i
        b, t, c = f_c.shape
        return self.mlp(ops.reshape(f_c, (b, t * c))), None, None


BRANCHES = {
    Variant.FULL: RecurrentBranch,
    Variant.NO_UNCERTAINTY: RecurrentBranch,
    Variant.NO_ATTENTION: RecurrentBranch,
    Variant.CNN_LSTM: RecurrentBranch,
    Variant.TWO_LSTM: TwoLSTMBranch,
    Variant.CNN_FC: FCBranch,
    Variant.CNN_STATE_FC: FCBranch,
}


class TrajectoryNet(Module):
    """
    Three command branches over a trunk that is shared unless config.shared_trunk is False.
    Parameter names: trunks.<k>.features..., trunks.<k>.motion..., branches.<command>....
    """

    def __init__(self, config: NetConfig, seed: int = None):
        super().__init__()
        self.config = config
        n_trunks = 1 if config.shared_trunk else N_COMMANDS
        self.trunks = ModuleList([Trunk(config) for _ in range(n_trunks)])
        self.branches = ModuleList([BRANCHES[config.variant](config) for _ in range(N_COMMANDS)])
        if seed is not None:
            init_parameters(self, seed)

    @property
    def variant(self) -> Variant:
        return self.config.variant

    def trunk_for(self, command: int) -> Trunk:
        return self.trunks[0 if self.config.shared_trunk else command]

    def _check_inputs(self, images, motion, commands):
        h, w = self.config.image_size
        t = self.config.history
        images = np.asarray(images, dtype=get_default_dtype())
        motion = np.asarray(motion, dtype=get_default_dtype())
        commands = np.asarray(commands).astype(int).reshape(-1)
        if images.shape[1:] != (t, h, w, 3):
            raise ShapeMismatchError(f"Expected observations of shape (B, {t}, {h}, {w}, 3), got {images.shape}")
        if motion.shape != (len(images), t, 3):
            raise ShapeMismatchError(f"Expected motion of shape ({len(images)}, {t}, 3), got {motion.shape}")
        if not len(images):
            raise InvalidArgumentError("Empty batch")
        if len(commands) != len(images):
            raise ShapeMismatchError(f"{len(commands)} commands for {len(images)} samples")
        bad = sorted(set(commands.tolist()) - set(range(N_COMMANDS)))
        if bad:
            raise InvalidArgumentError(f"Unknown command(s) {bad}; commands are 0 (straight), 1 (left), 2 (right)")
        return images, motion, commands

    def forward(self, images, motion, commands) -> ModelOutput:
        """
        :param images:      (B, 12, H, W, 3) observation histories in [0, 1]
        :param motion:      (B, 12, 3) body-frame (v, x, y) histories
        :param commands:    (B,) command indices
        :return:            ModelOutput of Tensors, rows in input order
        """
        images, motion, commands = self._check_inputs(images, motion, commands)
        order, trajectories, log_vars, attentions = [], [], [], []
        for command in range(N_COMMANDS):
            rows = np.flatnonzero(commands == command)
            if not rows.size:
                continue
            f_i, f_m = self.trunk_for(command)(images[rows], motion[rows])
            trajectory, log_var, attention = self.branches[command](f_i, f_m)
            order.append(rows)
            trajectories.append(trajectory)
            log_vars.append(log_var)
            attentions.append(attention)

        inverse = np.argsort(np.concatenate(order), kind="stable")
        shape = (len(images), self.config.horizon, 3)

        def gather(parts, reshape_to=None):
            if parts[0] is None:
                return None
            joined = parts[0] if len(parts) == 1 else ops.concat(parts, axis=0)[inverse]
            return joined if reshape_to is None else ops.reshape(joined, reshape_to)
        return ModelOutput(gather(trajectories, shape), gather(log_vars, shape), gather(attentions))

    __call__ = forward

    def predict(self, images, motion, commands) -> ModelOutput:
        """forward() returning plain arrays"""
        out = self.forward(images, motion, commands)
        return ModelOutput(*(None if t is None else t.value for t in (out.trajectory, out.log_var, out.attention)))

    def feature_extract(self, image: np.ndarray, command: int = 0) -> np.ndarray:
        """(H, W, 3) -> (F_img,)"""
        return self.trunk_for(command).features(np.asarray(image, dtype=get_default_dtype())[None]).value[0]

    def balance_motion(self, point, command: int = 0) -> np.ndarray:
        """(v, x, y) -> (F_mot,)"""
        trunk = self.trunk_for(command)
        if "motion" not in trunk._modules:
            raise InvalidArgumentError(f"Variant {self.variant.value} has no motion encoder")
        return trunk.motion(Tensor(np.asarray(point, dtype=get_default_dtype())[None])).value[0]
