from dataclasses import dataclass, asdict, replace
from enum import Enum
from typing import Tuple

from geometry import HISTORY_LEN, HORIZON
from utils.exceptions import ConfigError, UnsupportedVariantError

N_COMMANDS = 3


class Variant(str, Enum):
    FULL = "M0"
    NO_UNCERTAINTY = "M1"
    NO_ATTENTION = "M2"
    TWO_LSTM = "M3"
    CNN_FC = "CNN_FC"
    CNN_LSTM = "CNN_LSTM"
    CNN_STATE_FC = "CNNState_FC"

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        aliases = {"NOUNCERTAINTY": cls.NO_UNCERTAINTY, "NOATTENTION": cls.NO_ATTENTION,
                   "TWOLSTM": cls.TWO_LSTM, "CNNSTATE_FC": cls.CNN_STATE_FC}
        key = str(name).upper().replace("-", "_")
        for variant in cls:
            if variant.value.upper() == key or variant.name == key:
                return variant
        if key.replace("_", "") in aliases:
            return aliases[key.replace("_", "")]
        raise UnsupportedVariantError(f"Unknown model variant {name}; expected one of {[v.value for v in cls]}")

    @property
    def has_uncertainty(self) -> bool:
        return self is Variant.FULL

    @property
    def has_attention(self) -> bool:
        return self in (Variant.FULL, Variant.NO_UNCERTAINTY)

    @property
    def uses_motion(self) -> bool:
        return self not in (Variant.CNN_FC, Variant.CNN_LSTM)


def alternate_strides(n_blocks: int) -> Tuple[int, ...]:
    """stride 2 on every other block, starting with the first"""
    return tuple(2 if k % 2 == 0 else 1 for k in range(n_blocks))


@dataclass(frozen=True)
class NetConfig:
    """
    Dimensions of a trajectory network. The defaults are the toy preset; see PRESETS for the full-size one.
    """
    variant: Variant = Variant.FULL
    image_size: Tuple[int, int] = (96, 96)              # (H, W)
    stem_channels: int = 16
    block_channels: Tuple[int, ...] = (16, 24, 24, 32)
    block_strides: Tuple[int, ...] = None               # default: alternate_strides()
    expansion: int = 2
    f_img: int = 128
    f_mot: int = 32
    hidden: int = 96
    lstm_layers: int = 3
    attention_hidden: int = 64
    fc_width: int = 512
    history: int = HISTORY_LEN
    horizon: int = HORIZON
    shared_trunk: bool = True
    log_var_clamp: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "image_size", tuple(self.image_size))
        object.__setattr__(self, "block_channels", tuple(self.block_channels))
        if self.block_strides is None:
            object.__setattr__(self, "block_strides", alternate_strides(len(self.block_channels)))
        object.__setattr__(self, "block_strides", tuple(self.block_strides))
        if len(self.block_strides) != len(self.block_channels):
            raise ConfigError(f"{len(self.block_channels)} bottleneck blocks but {len(self.block_strides)} strides")
        for name in ("stem_channels", "expansion", "f_img", "f_mot", "hidden", "lstm_layers", "attention_hidden",
                     "fc_width", "history", "horizon"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be positive, got {getattr(self, name)}")
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ConfigError(f"model.image_size must be (H, W), got {self.image_size}")

    @property
    def combined_dim(self) -> int:
        return self.f_img + self.f_mot

    @property
    def n_blocks(self) -> int:
        return len(self.block_channels)

    @property
    def output_size(self) -> int:
        return self.horizon * 3

    def with_variant(self, variant) -> "NetConfig":
        return replace(self, variant=Variant.parse(variant))

    def to_dict(self) -> dict:
        content = asdict(self)
        content["variant"] = self.variant.value
        content["image_size"] = list(self.image_size)
        content["block_channels"] = list(self.block_channels)
        content["block_strides"] = list(self.block_strides)
        return content

    @classmethod
    def from_dict(cls, content: dict) -> "NetConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(content) - known)
        if unknown:
            raise ConfigError(f"Unknown model config keys: {unknown}")
        return cls(**content)


MOBILENET_CHANNELS = (16, 24, 24, 32, 32, 32, 64, 64, 64, 64, 96, 96, 96, 160, 160, 160, 320)
MOBILENET_STRIDES = (1, 2, 1, 2, 1, 1, 2, 1, 1, 1, 1, 1, 1, 2, 1, 1, 1)

PRESETS = {
    "toy": {},
    "full": dict(image_size=(224, 224), stem_channels=32, block_channels=MOBILENET_CHANNELS,
                  block_strides=MOBILENET_STRIDES, expansion=6, f_img=512, f_mot=128, hidden=256,
                  attention_hidden=256),
    "tiny": dict(image_size=(16, 16), stem_channels=4, block_channels=(4, 6), expansion=2, f_img=8, f_mot=4,
                 hidden=6, attention_hidden=8, fc_width=16),
}


def preset(name: str, **overrides) -> NetConfig:
    """Named model size ("toy", "full" or "tiny") with field overrides"""
    if name not in PRESETS:
        raise ConfigError(f"Unknown model preset {name}; expected one of {sorted(PRESETS)}")
    return NetConfig(**{**PRESETS[name], **overrides})
