"""
Scalar uncertainty from predicted log-variances, threshold calibration, and how well high uncertainty announces
closed-loop failures.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
import pandas as pd

from logger.logger import logger
from models import LOG_VAR_CLAMP, TrajectoryNet
from sim_world import RenderConfig, apply_speckle
from utils import derive_rng
from utils.exceptions import InvalidArgumentError, UnsupportedVariantError

if TYPE_CHECKING:
    from evaluation.benchmark import BenchmarkResult

UNCERTAINTY_SUMMARIES = ("max", "mean", "final")
CAPTURE_WINDOW = 3.0
CORRUPTION_FACTOR = 10.0


def scalar_uncertainty(log_var, summary: str = "max", clamp: float = LOG_VAR_CLAMP):
    """
    One number per prediction from its (22, 3) log-variances, via the standard deviations exp(lv / 2):
        max     largest over steps and dimensions
        mean    average over steps and dimensions
        final   largest over the dimensions of the last step

    :param log_var: (22, 3) or (N, 22, 3)
    :return:        float for a single prediction, (N,) array otherwise
    """
    if summary not in UNCERTAINTY_SUMMARIES:
        raise InvalidArgumentError(f"Unknown uncertainty summary `{summary}`; expected {UNCERTAINTY_SUMMARIES}")
    std = np.exp(0.5 * np.clip(np.asarray(log_var, dtype=np.float64), -clamp, clamp))
    single = std.ndim == 2
    std = std[None] if single else std
    if summary == "max":
        u = std.max(axis=(1, 2))
    elif summary == "mean":
        u = std.mean(axis=(1, 2))
    else:
        u = std[:, -1, :].max(axis=1)
    return float(u[0]) if single else u


def calibrate_threshold(traces: Iterable, percentile: float = 99.0) -> float:
    """
    Uncertainty threshold: the given percentile of scalar uncertainties observed while driving normally.

    :param traces:      scalar uncertainties, flat or grouped per episode
    :param percentile:  in [0, 100]
    """
    if not 0.0 <= percentile <= 100.0:
        raise InvalidArgumentError(f"Percentile must lie in [0, 100], got {percentile}")
    parts = [np.ravel(np.asarray(trace, dtype=np.float64)) for trace in traces]
    values = np.concatenate(parts) if parts else np.empty(0)
    if values.size == 0:
        raise InvalidArgumentError("Cannot calibrate an uncertainty threshold from empty traces")
    return float(np.percentile(values, percentile))


@dataclass
class CaptureReport:
    threshold: float
    window: float
    n_failures: int
    n_captured: int
    fraction: float                 # captured / failures, 0 without failures
    false_alarm_rate: float         # share of the ticks of successful episodes above the threshold
    failures: pd.DataFrame          # episode_id, cause, end_time, peak_uncertainty, captured

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "window": self.window, "n_failures": self.n_failures,
                "n_captured": self.n_captured, "fraction": self.fraction, "false_alarm_rate": self.false_alarm_rate,
                "failures": self.failures.to_dict("records")}


def uncertainty_capture(result: "BenchmarkResult", threshold: float, window: float = CAPTURE_WINDOW) -> CaptureReport:
    """
    A failed episode is captured when some tick within `window` seconds before its end had an uncertainty above
    the threshold.

    :raises UnsupportedVariantError:    the benchmarked model predicts no uncertainty
    """
    if not result.has_uncertainty:
        raise UnsupportedVariantError(f"Model {result.model} predicts no uncertainty; capture analysis needs a "
                                      f"log-variance head")
    rows, clean_ticks, clean_alarms = [], 0, 0
    for episode in result.episodes:
        times = np.array([tick["time"] for tick in episode.trace])
        u = np.array([tick["uncertainty"] for tick in episode.trace], dtype=np.float64)
        if episode.success:
            clean_ticks += len(u)
            clean_alarms += int((u > threshold).sum())
            continue
        recent = u[times >= episode.end_time - window]
        rows.append({"episode_id": episode.episode_id, "cause": episode.cause, "end_time": episode.end_time,
                     "peak_uncertainty": float(recent.max()) if recent.size else float("nan"),
                     "captured": bool((recent > threshold).any())})
    failures = pd.DataFrame(rows, columns=["episode_id", "cause", "end_time", "peak_uncertainty", "captured"])
    n_captured = int(failures["captured"].sum()) if len(failures) else 0
    if failures.empty:
        logger.warning("No failed episodes: the capture fraction is reported as 0")
    return CaptureReport(threshold=float(threshold), window=window, n_failures=len(failures), n_captured=n_captured,
                         fraction=n_captured / len(failures) if len(failures) else 0.0,
                         false_alarm_rate=clean_alarms / clean_ticks if clean_ticks else 0.0, failures=failures)


def corrupt_observations(images: np.ndarray, seed: int, factor: float = CORRUPTION_FACTOR,
                         render: RenderConfig = None) -> np.ndarray:
    """Rain speckle at `factor` times the rendered rain density on every frame of (N, 12, H, W, 3) histories"""
    render = render or RenderConfig()
    p = min(render.rain_speckle_p * factor, 1.0)
    out = np.empty_like(images, dtype=np.float64)
    for i in range(images.shape[0]):
        for k in range(images.shape[1]):
            out[i, k] = apply_speckle(images[i, k], derive_rng(seed, "corruption", i, k), p, render.rain_speckle_gain)
    return out


def corruption_probe(model: TrajectoryNet, images: np.ndarray, motion: np.ndarray, commands, threshold: float,
                     seed: int = 0, factor: float = CORRUPTION_FACTOR, summary: str = "max",
                     render: RenderConfig = None) -> pd.DataFrame:
    """
    Scalar uncertainty of every sample before and after heavy speckle corruption.

    :return: clean_uncertainty, corrupted_uncertainty, above_threshold (of the corrupted one) per sample
    """
    if not model.variant.has_uncertainty:
        raise UnsupportedVariantError(f"Variant {model.variant.value} predicts no uncertainty")
    clean = model.predict(images, motion, commands).log_var
    corrupted = model.predict(corrupt_observations(images, seed, factor, render), motion, commands).log_var
    table = pd.DataFrame({"clean_uncertainty": scalar_uncertainty(clean, summary),
                          "corrupted_uncertainty": scalar_uncertainty(corrupted, summary)})
    table["above_threshold"] = table["corrupted_uncertainty"] > threshold
    logger.info(f"Corruption x{factor:g}: {table['above_threshold'].mean():.1%} of {len(table)} samples above "
                f"the threshold {threshold:.4f}")
    return table
