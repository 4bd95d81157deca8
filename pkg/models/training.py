"""
Mini-batch Adam training with early stopping on the validation loss.
"""

import os
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np
import pandas as pd

from dataset import Dataset, FrameRecord
from logger.logger import logger
from models.loss import trajectory_loss
from models.network import TrajectoryNet
from models.persistence import save_model
from nn import AdamState, adam_step, set_default_dtype, get_default_dtype
from utils import derive_rng
from utils.exceptions import TrainingAbortError, InvalidArgumentError, OutOfRangeError

BEST_CHECKPOINT = "best.ckpt"
LOSS_CURVES_FILE = "loss_curves.csv"


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 15
    patience: int = 10                  # evaluations without improvement before stopping
    eval_every: int = 50                # optimizer steps between validation evaluations
    max_steps: int = 20000
    max_val_batches: Optional[int] = None
    precision: str = "float64"
    freeze_log_var: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.eval_every < 1 or self.max_steps < 1:
            raise InvalidArgumentError(f"Training sizes must be positive: {self}")
        if self.precision not in ("float64", "float32"):
            raise InvalidArgumentError(f"Unknown precision {self.precision}")


@dataclass
class Batch:
    images: np.ndarray          # (B, 12, H, W, 3)
    motion: np.ndarray          # (B, 12, 3)
    commands: np.ndarray        # (B,)
    targets: np.ndarray         # (B, 22, 3)
    ids: List[str]              # per-sample identifiers for diagnostics


class TrainingData:
    """Source of training/validation batches"""

    def size(self, split: str) -> int:
        raise NotImplementedError

    def batches(self, split: str, batch_size: int, rng: np.random.Generator = None) -> Iterator[Batch]:
        raise NotImplementedError


class ArrayData(TrainingData):
    """In-memory samples; `splits` maps a split name to a dict of arrays named like Batch fields"""

    def __init__(self, splits: dict):
        self.splits = splits

    def size(self, split: str) -> int:
        return len(self.splits[split]["targets"]) if split in self.splits else 0

    def batches(self, split: str, batch_size: int, rng: np.random.Generator = None) -> Iterator[Batch]:
        arrays = self.splits[split]
        n = len(arrays["targets"])
        order = np.arange(n) if rng is None else rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            yield Batch(images=arrays["images"][rows], motion=arrays["motion"][rows],
                        commands=arrays["commands"][rows], targets=arrays["targets"][rows],
                        ids=[f"{split}:{k}" for k in rows])


class DatasetData(TrainingData):
    """Batches assembled from a stored dataset"""

    def __init__(self, dataset: Dataset):
        self.dataset = dataset

    def size(self, split: str) -> int:
        return len(self.dataset.manifest.splits.get(split, []))

    def batch_of(self, records: List[FrameRecord]) -> Batch:
        return Batch(images=np.stack([self.dataset.observations(r) for r in records]),
                     motion=np.stack([r.motion for r in records]),
                     commands=np.array([int(r.command) for r in records]),
                     targets=np.stack([r.future.values for r in records]),
                     ids=[f"{r.episode_id}@{r.tick}" for r in records])

    def batches(self, split: str, batch_size: int, rng: np.random.Generator = None) -> Iterator[Batch]:
        for records in self.dataset.batches(split, batch_size, rng):
            yield self.batch_of(records)


@dataclass
class TrainResult:
    curves: pd.DataFrame                # step, epoch, train_loss, val_loss
    best_step: int
    best_val_loss: float
    checkpoint: Optional[str]
    stopped_early: bool


def _batch_loss(model: TrajectoryNet, batch: Batch, config: TrainConfig):
    try:
        output = model.forward(batch.images, batch.motion, batch.commands)
        return trajectory_loss(output, batch.targets, config.freeze_log_var, model.config.log_var_clamp)
    except OutOfRangeError as e:
        raise TrainingAbortError(f"Non-finite values in batch {batch.ids[:5]}{'...' if len(batch.ids) > 5 else ''} "
                                 f"(commands {np.bincount(batch.commands, minlength=3).tolist()}): {e}")


def evaluate_loss(model: TrajectoryNet, data: TrainingData, split: str, config: TrainConfig) -> float:
    """Sample-weighted mean loss over a split"""
    total, count = 0.0, 0
    for k, batch in enumerate(data.batches(split, config.batch_size)):
        if config.max_val_batches is not None and k >= config.max_val_batches:
            break
        total += float(_batch_loss(model, batch, config).value) * len(batch.targets)
        count += len(batch.targets)
    return total / count


def train(model: TrajectoryNet, data: TrainingData, config: TrainConfig, seed: int,
          output_dir: str = None) -> TrainResult:
    """
    Train in place. The parameters of the best validation evaluation are restored at the end and, with an
    output directory, saved as best.ckpt next to loss_curves.csv.

    :raises TrainingAbortError:     non-finite loss, with the batch's sample ids
    :raises InvalidArgumentError:   empty training or validation split
    """
    for split in ("train", "val"):
        if data.size(split) == 0:
            raise InvalidArgumentError(f"The {split} split is empty")
    previous_dtype = get_default_dtype()
    set_default_dtype(np.float32 if config.precision == "float32" else np.float64)
    _cast(model, get_default_dtype())
    try:
        return _train(model, data, config, seed, output_dir)
    finally:
        set_default_dtype(previous_dtype)
        _cast(model, previous_dtype)


def _cast(model: TrajectoryNet, dtype) -> None:
    for p in model.parameters().values():
        p.value = p.value.astype(dtype, copy=False)


def _train(model, data, config, seed, output_dir) -> TrainResult:
    params = model.parameters()
    state = AdamState(lr=config.lr)
    rows, best_loss, best_step, best_state = [], np.inf, 0, model.state()
    stale, step, epoch, running = 0, 0, 0, []
    stopped_early = False
    logger.info(f"Training {model.variant.value} ({model.n_parameters()} parameters) on {data.size('train')} "
                f"samples, validating on {data.size('val')}")
    while step < config.max_steps and not stopped_early:
        for batch in data.batches("train", config.batch_size, derive_rng(seed, "shuffle", epoch)):
            model.zero_grad()
            loss = _batch_loss(model, batch, config)
            loss.backward()
            adam_step(params, state)
            running.append(float(loss.value))
            step += 1
            if step % config.eval_every == 0 or step == config.max_steps:
                val_loss = evaluate_loss(model, data, "val", config)
                rows.append({"step": step, "epoch": epoch, "train_loss": float(np.mean(running)),
                             "val_loss": val_loss})
                running = []
                logger.info(f"step {step}: train loss {rows[-1]['train_loss']:.5f}, val loss {val_loss:.5f}")
                if val_loss < best_loss:
                    best_loss, best_step, best_state, stale = val_loss, step, model.state(), 0
                else:
                    stale += 1
                    if stale >= config.patience:
                        logger.info(f"Validation loss has not improved for {stale} evaluations; "
                                    f"stopping at step {step}, best step {best_step}")
                        stopped_early = True
                        break
            if step >= config.max_steps:
                break
        epoch += 1

    model.load_state(best_state)
    curves = pd.DataFrame(rows, columns=["step", "epoch", "train_loss", "val_loss"])
    checkpoint = None
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        curves.to_csv(os.path.join(output_dir, LOSS_CURVES_FILE), index=False)
        checkpoint = save_model(model, os.path.join(output_dir, BEST_CHECKPOINT), precision=config.precision,
                                extra={"best_step": best_step, "best_val_loss": best_loss, "seed": seed})
    return TrainResult(curves=curves, best_step=best_step, best_val_loss=float(best_loss), checkpoint=checkpoint,
                       stopped_early=stopped_early)
