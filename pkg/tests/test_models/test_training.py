import math
import os
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from dataset import load_dataset
from models import train, TrainConfig, ArrayData, load_model, BEST_CHECKPOINT, LOSS_CURVES_FILE, DatasetData
from tests.episode_builders import saved_dataset
from tests.model_builders import tiny_model, array_data, random_inputs
from utils.exceptions import TrainingAbortError, InvalidArgumentError


def test_single_sample_is_memorized():
    model = tiny_model("M1", seed=2)
    data = array_data(n=1, seed=3)
    config = TrainConfig(lr=1e-2, batch_size=1, eval_every=25, max_steps=300, patience=100)
    result = train(model, data, config, seed=0)
    first, last = result.curves["train_loss"].iloc[0], result.curves["train_loss"].iloc[-1]
    assert last < 0.1 * first
    assert result.best_step == result.curves.loc[result.curves["val_loss"].idxmin(), "step"]


@pytest.mark.slow
def test_log_variance_learns_residual_scale():
    n, scale = 20, 0.5
    rng = np.random.default_rng(0)
    noise = rng.normal(size=(n, 22, 3))
    noise = (noise - noise.mean(axis=0)) / noise.std(axis=0)
    images = np.full((n, 12, 16, 16, 3), 0.3)
    arrays = {"images": images, "motion": np.zeros((n, 12, 3)), "commands": np.zeros(n, dtype=int),
              "targets": scale * noise}
    data = ArrayData({"train": arrays, "val": arrays})
    model = tiny_model("M0", seed=1)
    train(model, data, TrainConfig(lr=2e-2, batch_size=n, eval_every=50, max_steps=400, patience=100), seed=0)
    log_var = model.predict(images[:1], arrays["motion"][:1], [0]).log_var[0]
    assert np.all(np.abs(log_var - math.log(scale ** 2)) < 0.2)


def test_frozen_log_var_trains_like_plain_mse():
    data = array_data(n=6, seed=4)
    config = TrainConfig(lr=1e-3, batch_size=3, eval_every=2, max_steps=6)
    frozen = train(tiny_model("M0", seed=7), data, replace(config, freeze_log_var=True), 1)
    plain = train(tiny_model("M1", seed=7), data, config, 1)
    assert np.allclose(frozen.curves["train_loss"], plain.curves["train_loss"], rtol=1e-12, atol=0)
    assert np.allclose(frozen.curves["val_loss"], plain.curves["val_loss"], rtol=1e-12, atol=0)


def test_same_seed_same_curves(tmp_path):
    data = array_data(n=8, seed=1)
    config = TrainConfig(lr=1e-3, batch_size=3, eval_every=2, max_steps=8)
    a = train(tiny_model("M0", seed=3), data, config, seed=9, output_dir=str(tmp_path / "a"))
    b = train(tiny_model("M0", seed=3), data, config, seed=9, output_dir=str(tmp_path / "b"))
    assert a.curves.equals(b.curves)
    assert open(a.checkpoint, "rb").read() == open(b.checkpoint, "rb").read()
    stored = pd.read_csv(tmp_path / "a" / LOSS_CURVES_FILE)
    assert list(stored.columns) == ["step", "epoch", "train_loss", "val_loss"]
    assert len(stored) == 4


def test_best_checkpoint_reloads(tmp_path):
    data = array_data(n=6, seed=2)
    model = tiny_model("M3", seed=3)
    result = train(model, data, TrainConfig(lr=1e-3, batch_size=3, eval_every=2, max_steps=6), seed=0,
                   output_dir=str(tmp_path))
    assert result.checkpoint == os.path.join(str(tmp_path), BEST_CHECKPOINT)
    loaded, meta = load_model(result.checkpoint)
    assert meta["best_step"] == result.best_step
    inputs = random_inputs(3, seed=8)
    assert np.array_equal(loaded.predict(*inputs).trajectory, model.predict(*inputs).trajectory)


def test_early_stopping():
    images, motion, commands = random_inputs(3, seed=5)
    train_split = {"images": images, "motion": motion, "commands": commands, "targets": np.ones((3, 22, 3))}
    data = ArrayData({"train": train_split, "val": {**train_split, "targets": -np.ones((3, 22, 3))}})
    config = TrainConfig(lr=1e-2, batch_size=3, eval_every=1, max_steps=500, patience=2)
    result = train(tiny_model("M1", seed=0), data, config, seed=0)
    assert result.stopped_early
    assert len(result.curves) < 500
    assert result.best_val_loss == result.curves["val_loss"].min()


def test_non_finite_batch_aborts_with_ids():
    data = array_data(n=4, seed=6)
    data.splits["train"] = dict(data.splits["train"])
    data.splits["train"]["images"] = data.splits["train"]["images"].copy()
    data.splits["train"]["images"][2, 0, 0, 0, 0] = np.nan
    with pytest.raises(TrainingAbortError, match="train:2"):
        train(tiny_model("M0"), data, TrainConfig(batch_size=4, max_steps=1), seed=0)


def test_empty_split_rejected():
    data = array_data(n=3)
    data.splits.pop("val")
    with pytest.raises(InvalidArgumentError, match="val"):
        train(tiny_model("M0"), data, TrainConfig(), seed=0)


def test_dataset_batches(tmp_path):
    data = DatasetData(load_dataset(saved_dataset(str(tmp_path))))
    batch = next(data.batches("train", 5))
    assert batch.images.shape == (5, 12, 16, 16, 3)
    assert batch.targets.shape == (5, 22, 3)
    result = train(tiny_model("M0"), data, TrainConfig(batch_size=5, eval_every=2, max_steps=2), seed=0)
    assert len(result.curves) == 1
