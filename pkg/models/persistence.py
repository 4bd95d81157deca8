from typing import Tuple

from models.config import NetConfig
from models.network import TrajectoryNet
from nn import save_checkpoint, load_checkpoint
from utils import version_string
from utils.exceptions import CheckpointError, ConfigError


def save_model(model: TrajectoryNet, path: str, precision: str = "float64", extra: dict = None) -> str:
    """Checkpoint with the model config embedded in the header, so load_model() needs nothing else"""
    meta = {"model": model.config.to_dict(), "version": version_string(), **(extra or {})}
    return save_checkpoint(path, model.state(), meta, precision)


def load_model(path: str) -> Tuple[TrajectoryNet, dict]:
    """:return: (model, checkpoint metadata)"""
    tensors, meta = load_checkpoint(path)
    if "model" not in meta:
        raise CheckpointError(f"{path} has no model config in its header")
    try:
        config = NetConfig.from_dict(meta["model"])
    except (ConfigError, TypeError) as e:
        raise CheckpointError(f"{path}: invalid model config: {e}")
    model = TrajectoryNet(config)
    model.load_state(tensors)
    return model, meta
