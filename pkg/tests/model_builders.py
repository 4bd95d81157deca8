"""
Tiny models and in-memory samples for model, controller and evaluation tests.
"""

import numpy as np

from models import preset, TrajectoryNet, ArrayData


def tiny_model(variant="M0", seed=0, **overrides) -> TrajectoryNet:
    return TrajectoryNet(preset("tiny", variant=variant, **overrides), seed=seed)


def random_inputs(n=4, seed=0, commands=None, size=16):
    rng = np.random.default_rng(seed)
    images = rng.uniform(0, 1, size=(n, 12, size, size, 3))
    motion = rng.normal(size=(n, 12, 3))
    commands = np.arange(n) % 3 if commands is None else np.asarray(commands)
    return images, motion, commands


def bind(model, name: str, tensor) -> None:
    """Replace the parameter at a dotted name with the given tensor"""
    *path, last = name.split(".")
    module = model
    for part in path:
        module = module._modules[part]
    setattr(module, last, tensor)


def array_data(n=12, seed=0, targets=None, size=16, commands=None) -> ArrayData:
    images, motion, commands = random_inputs(n, seed, commands, size)
    if targets is None:
        targets = np.random.default_rng(seed + 1).uniform(-1, 1, size=(n, 22, 3))
    arrays = {"images": images, "motion": motion, "commands": commands, "targets": targets}
    return ArrayData({"train": arrays, "val": arrays})
