import os
from typing import List, Tuple

import imageio.v3 as iio
import numpy as np
import pandas as pd

from models import TrajectoryNet, INPUT_MEAN
from nn import ops, Tensor, get_default_dtype
from utils import entropy
from utils.exceptions import UnsupportedVariantError, ShapeMismatchError


def attention_table(model: TrajectoryNet, images: np.ndarray, motion: np.ndarray, commands, ids=None) \
        -> pd.DataFrame:
    """
    Attention weights over the 12 history steps (w_0 oldest ... w_11 current) and their entropy, one row per sample
    """
    if not model.variant.has_attention:
        raise UnsupportedVariantError(f"Variant {model.variant.value} has no attention")
    weights = model.predict(images, motion, commands).attention
    table = pd.DataFrame(weights, columns=[f"w_{k}" for k in range(weights.shape[1])])
    table.insert(0, "sample", list(ids) if ids is not None else list(range(len(weights))))
    table.insert(1, "command", np.asarray(commands).astype(int).tolist())
    table["entropy"] = [entropy(row) for row in weights]
    return table


def feature_maps(model: TrajectoryNet, image: np.ndarray, command: int = 0) -> List[Tuple[str, np.ndarray]]:
    """
    Channel-averaged activations of the stem and of every bottleneck block for one (H, W, 3) frame

    :return: (layer name, (h, w) map) pairs, input side first
    """
    features = model.trunk_for(command).features
    h, w = model.config.image_size
    if image.shape != (h, w, 3):
        raise ShapeMismatchError(f"Expected an image of shape ({h}, {w}, 3), got {image.shape}")
    x = Tensor(np.transpose(np.asarray(image, dtype=get_default_dtype()), (2, 0, 1))[None] - INPUT_MEAN)
    x = ops.relu6(features.stem(x))
    maps = [("stem", x.value[0].mean(axis=0))]
    for k, block in enumerate(features.blocks):
        x = block(x)
        maps.append((f"block{k}", x.value[0].mean(axis=0)))
    return maps


def to_raster(feature_map: np.ndarray) -> np.ndarray:
    """Min-max scaled grayscale uint8 raster, 3 channels; a constant map becomes black"""
    low, high = float(feature_map.min()), float(feature_map.max())
    scaled = np.zeros_like(feature_map) if high - low < 1e-12 else (feature_map - low) / (high - low)
    gray = np.round(scaled * 255.0).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def save_feature_maps(maps: List[Tuple[str, np.ndarray]], directory: str, prefix: str = "") -> List[str]:
    """One binary PPM per layer, named <prefix><layer>.ppm"""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, feature_map in maps:
        path = os.path.join(directory, f"{prefix}{name}.ppm")
        iio.imwrite(path, to_raster(feature_map), extension=".ppm")
        paths.append(path)
    return paths
