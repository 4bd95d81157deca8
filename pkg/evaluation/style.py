from typing import Dict, Sequence

import numpy as np
import pandas as pd

from evaluation.metrics import accelerations
from geometry import FRAME_DT
from utils.exceptions import InvalidArgumentError

STYLE_COLUMNS = ["group", "accel_mean", "accel_std", "n_trajectories"]


def driving_style(groups: Dict[str, Sequence], dt: float = FRAME_DT) -> pd.DataFrame:
    """
    Driving style of each group of trajectories: mean and population standard deviation of the acceleration
    magnitudes pooled over every interval of every trajectory in the group.

    :param groups:  group name (typically a weather) -> trajectories, each a Trajectory or a (22, 3) array
    :return:        One row per group, STYLE_COLUMNS
    """
    rows = []
    for name, trajectories in groups.items():
        if len(trajectories) == 0:
            raise InvalidArgumentError(f"Driving style group `{name}` is empty")
        magnitudes = np.abs(accelerations(np.stack([getattr(t, "values", t) for t in trajectories]), dt)).ravel()
        rows.append({"group": name, "accel_mean": float(magnitudes.mean()), "accel_std": float(magnitudes.std()),
                     "n_trajectories": len(trajectories)})
    return pd.DataFrame(rows, columns=STYLE_COLUMNS)


def style_comparison(expert: Dict[str, Sequence], model: Dict[str, Sequence], dt: float = FRAME_DT) \
        -> pd.DataFrame:
    """
    Expert (ground truth) and model driving style side by side, one row per group present in both
    """
    shared = [name for name in expert if name in model]
    left = driving_style({name: expert[name] for name in shared}, dt).set_index("group")
    right = driving_style({name: model[name] for name in shared}, dt).set_index("group")
    table = pd.DataFrame({"expert_mean": left["accel_mean"], "expert_std": left["accel_std"],
                          "model_mean": right["accel_mean"], "model_std": right["accel_std"],
                          "n_trajectories": left["n_trajectories"]})
    table.index.name = "group"
    return table.reset_index()
