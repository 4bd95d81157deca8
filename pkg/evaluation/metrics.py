"""
Open-loop trajectory metrics.

Per sample, with prediction and ground truth as (22, 3) arrays of (v, x, y):
    accel   mean |dv| / dt over the prediction's 21 intervals
    e_v     mean |v_pred - v_true|
    e_acc   mean |a_pred - a_true| over the 21 intervals
    e_ad    mean displacement over the 22 waypoints
    e_x     mean |x_pred - x_true| (lateral)
    e_y     mean |y_pred - y_true| (longitudinal)
    e_fd    displacement at the last waypoint
"""

from dataclasses import dataclass, asdict
from typing import Dict, Optional

import numpy as np
import pandas as pd

from geometry import Trajectory, HORIZON, FRAME_DT
from utils.exceptions import ShapeMismatchError, InvalidArgumentError

METRIC_COLUMNS = ["accel", "e_v", "e_acc", "e_ad", "e_x", "e_y", "e_fd"]


def _as_batch(values, what: str) -> np.ndarray:
    values = np.asarray(values.values if isinstance(values, Trajectory) else values, dtype=np.float64)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3 or values.shape[1:] != (HORIZON, 3):
        raise ShapeMismatchError(f"{what} must be ({HORIZON}, 3) or (N, {HORIZON}, 3), got {values.shape}")
    return values


def accelerations(values, dt: float = FRAME_DT) -> np.ndarray:
    """(N, 21) signed accelerations dv / dt of (N, 22, 3) trajectories"""
    return np.diff(_as_batch(values, "trajectory")[:, :, 0], axis=1) / dt


def displacements(pred, truth) -> np.ndarray:
    """(N, 22) waypoint distances"""
    pred, truth = _as_batch(pred, "prediction"), _as_batch(truth, "ground truth")
    return np.hypot(pred[:, :, 1] - truth[:, :, 1], pred[:, :, 2] - truth[:, :, 2])


def batch_metrics(pred, truth, dt: float = FRAME_DT) -> pd.DataFrame:
    """
    One row of METRIC_COLUMNS per sample.

    :param pred:    (N, 22, 3) predictions (or a single Trajectory / (22, 3) array)
    :param truth:   ground truth, same shape as pred
    :param dt:      waypoint spacing shared by both
    """
    pred, truth = _as_batch(pred, "prediction"), _as_batch(truth, "ground truth")
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} and ground truth {truth.shape} differ")
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    a_pred, a_true = accelerations(pred, dt), accelerations(truth, dt)
    distance = displacements(pred, truth)
    return pd.DataFrame({
        "accel": np.abs(a_pred).mean(axis=1),
        "e_v": np.abs(pred[:, :, 0] - truth[:, :, 0]).mean(axis=1),
        "e_acc": np.abs(a_pred - a_true).mean(axis=1),
        "e_ad": distance.mean(axis=1),
        "e_x": np.abs(pred[:, :, 1] - truth[:, :, 1]).mean(axis=1),
        "e_y": np.abs(pred[:, :, 2] - truth[:, :, 2]).mean(axis=1),
        "e_fd": distance[:, -1],
    }, columns=METRIC_COLUMNS)


def open_loop_metrics(pred: Trajectory, truth: Trajectory) -> Dict[str, float]:
    """
    Metric tuple of one sample

    :raises ShapeMismatchError:     the trajectories are not both 22 x 3
    :raises InvalidArgumentError:   different waypoint spacing
    """
    if not np.isclose(pred.dt, truth.dt, rtol=0, atol=1e-12):
        raise InvalidArgumentError(f"Trajectories sampled at different dt: {pred.dt} and {truth.dt}")
    return {key: float(value) for key, value in batch_metrics(pred, truth, pred.dt).iloc[0].items()}


@dataclass
class MetricsReport:
    accel: float
    e_v: float
    e_acc: float
    e_ad: float
    e_x: float
    e_y: float
    e_fd: float
    displacement_mean: np.ndarray          # (22,)
    displacement_std: np.ndarray           # (22,)
    predicted_std: Optional[np.ndarray]    # (22,) mean predicted standard deviation, when the model has one
    n_samples: int

    def __post_init__(self):
        assert self.e_ad >= max(self.e_x, self.e_y) - 1e-9 and self.e_ad <= self.e_x + self.e_y + 1e-9, \
            f"Displacement error {self.e_ad} outside [{max(self.e_x, self.e_y)}, {self.e_x + self.e_y}]"

    def metrics(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_COLUMNS}

    def horizon_curves(self) -> pd.DataFrame:
        curves = pd.DataFrame({"step": np.arange(1, HORIZON + 1), "time": FRAME_DT * np.arange(1, HORIZON + 1),
                               "displacement_mean": self.displacement_mean,
                               "displacement_std": self.displacement_std})
        if self.predicted_std is not None:
            curves["predicted_std"] = self.predicted_std
        return curves

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate_metrics(pred, truth, log_var=None, dt: float = FRAME_DT) -> MetricsReport:
    """
    Average the per-sample metrics over a set of samples.

    :param pred:        (N, 22, 3) predictions
    :param truth:       (N, 22, 3) ground truth
    :param log_var:     optional (N, 22, 3) predicted log-variances; their per-step standard deviation, averaged
                        over samples and the three dimensions, becomes MetricsReport.predicted_std
    """
    frame = batch_metrics(pred, truth, dt)
    if frame.empty:
        raise InvalidArgumentError("No samples to aggregate")
    distance = displacements(pred, truth)
    predicted_std = None
    if log_var is not None:
        predicted_std = np.exp(0.5 * _as_batch(log_var, "log-variance")).mean(axis=(0, 2))
    return MetricsReport(**{name: float(frame[name].mean()) for name in METRIC_COLUMNS},
                         displacement_mean=distance.mean(axis=0), displacement_std=distance.std(axis=0),
                         predicted_std=predicted_std, n_samples=len(frame))


def comparison_table(reports: Dict[str, MetricsReport]) -> pd.DataFrame:
    """One row per model, METRIC_COLUMNS as columns (the layout of an ablation/baseline comparison)"""
    rows = [{"model": name, **report.metrics(), "n_samples": report.n_samples} for name, report in reports.items()]
    return pd.DataFrame(rows, columns=["model"] + METRIC_COLUMNS + ["n_samples"])
