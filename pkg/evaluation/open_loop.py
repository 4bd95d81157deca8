"""
Run a model over a dataset split and score its trajectories against the recorded ones.
"""

from dataclasses import dataclass
from typing import Optional, List

import numpy as np
import pandas as pd

from dataset import Dataset, FrameRecord, command_name
from evaluation.metrics import batch_metrics, aggregate_metrics, MetricsReport, METRIC_COLUMNS
from evaluation.uncertainty import scalar_uncertainty
from logger.logger import logger
from models import TrajectoryNet
from utils.exceptions import InvalidArgumentError


@dataclass
class Predictions:
    samples: pd.DataFrame                   # episode_id, tick, weather, command, behavior
    trajectory: np.ndarray                  # (N, 22, 3)
    truth: np.ndarray                       # (N, 22, 3)
    log_var: Optional[np.ndarray] = None    # (N, 22, 3)
    attention: Optional[np.ndarray] = None  # (N, 12)

    def __len__(self):
        return len(self.truth)


def _describe(records: List[FrameRecord]) -> pd.DataFrame:
    return pd.DataFrame([{"episode_id": r.episode_id, "tick": r.tick, "weather": r.weather.value,
                          "command": command_name(r.command), "behavior": r.behavior.value} for r in records])


def predict_records(model: TrajectoryNet, dataset: Dataset, records: List[FrameRecord],
                    batch_size: int = 32) -> Predictions:
    if not records:
        raise InvalidArgumentError("No records to predict")
    parts = []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        parts.append(model.predict(np.stack([dataset.observations(r) for r in chunk]),
                                   np.stack([r.motion for r in chunk]), np.array([int(r.command) for r in chunk])))

    def joined(field):
        return None if getattr(parts[0], field) is None else np.concatenate([getattr(p, field) for p in parts])
    return Predictions(samples=_describe(records), trajectory=joined("trajectory"),
                       truth=np.stack([r.future.values for r in records]),
                       log_var=joined("log_var"), attention=joined("attention"))


def predict_split(model: TrajectoryNet, dataset: Dataset, split: str = "test", batch_size: int = 32,
                  max_samples: int = None) -> Predictions:
    records = dataset.split(split)
    if max_samples is not None:
        records = records[:max_samples]
    logger.info(f"Predicting {len(records)} {split} samples with {model.variant.value}")
    return predict_records(model, dataset, records, batch_size)


def sample_table(predictions: Predictions) -> pd.DataFrame:
    """Per-sample metrics next to the sample description (and its scalar uncertainty, when predicted)"""
    table = pd.concat([predictions.samples.reset_index(drop=True),
                       batch_metrics(predictions.trajectory, predictions.truth)], axis=1)
    if predictions.log_var is not None:
        table["uncertainty"] = scalar_uncertainty(predictions.log_var)
    return table


def evaluate_predictions(predictions: Predictions) -> MetricsReport:
    return aggregate_metrics(predictions.trajectory, predictions.truth, predictions.log_var)


def breakdown(table: pd.DataFrame, by: str) -> pd.DataFrame:
    """Mean metrics of a sample_table() per value of one column (weather, command, behavior)"""
    grouped = table.groupby(by, sort=True)
    out = grouped[METRIC_COLUMNS].mean()
    out["n_samples"] = grouped.size()
    return out.reset_index()
