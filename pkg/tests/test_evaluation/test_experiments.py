"""
Small-scale runs of the end-to-end experiments: the recovery-data ablation, the car model on the motorcycle and
the uncertainty response to heavily corrupted observations.
"""

import numpy as np
import pytest

from dataset import Behavior, DatasetConfig, build_dataset, load_dataset
from evaluation import (BenchmarkConfig, ModelPlanner, run_addnoise_benchmark, calibrate_threshold, corruption_probe,
                        corrupt_observations, scalar_uncertainty)
from expert import collect_episode, save_episode, list_episodes
from models import ArrayData, DatasetData, TrainConfig, train
from sim_world import MOTORCYCLE, RenderConfig, load_map, plan_route
from tests.model_builders import tiny_model

SHORT = dict(min_route_length=150.0, max_route_length=250.0)
ROUTES = [("A0>A1", "A1>A2"), ("A0>A1", "A1>B1"), ("B0>B1", "B1>B2"), ("B1>B2", "B2>A2")]
BUDGET = TrainConfig(lr=1e-3, batch_size=8, eval_every=5, max_steps=10)


@pytest.fixture(scope="module")
def datasets(tmp_path_factory):
    """The same noisy episodes built with and without the records touching a noise window"""
    network = load_map("town-a")
    episodes = str(tmp_path_factory.mktemp("noisy-episodes"))
    for seed, (start, goal) in enumerate(ROUTES):
        log = collect_episode(network, plan_route(network, start, goal), "clear-day", seed=seed, noise=True,
                              dynamic=False, render_config=RenderConfig(height=16, width=16))
        save_episode(log, episodes)
    built = {}
    for name, drop in (("with-recovery", False), ("without-recovery", True)):
        directory = str(tmp_path_factory.mktemp(name))
        config = DatasetConfig(ratios=(1, 1, 0), quotas=None, drop_noise_windows=drop)
        records, _ = build_dataset(list_episodes(episodes), directory, config, seed=0)
        built[name] = records, load_dataset(directory)
    return built


def trained(dataset, seed=0):
    model = tiny_model("M0", seed=seed)
    train(model, DatasetData(dataset), BUDGET, seed=seed)
    return model


@pytest.mark.slow
def test_recovery_ablation(datasets):
    full, with_recovery = datasets["with-recovery"]
    filtered, without_recovery = datasets["without-recovery"]
    assert any(record.behavior == Behavior.RECOVERY for record in full)
    assert filtered and not any(record.noise_overlap for record in filtered)
    assert [record.key for record in filtered] == [record.key for record in full if not record.noise_overlap]

    config = BenchmarkConfig(episodes=2, traffic=("empty",), setups=("training",), **SHORT)
    results = {name: run_addnoise_benchmark(ModelPlanner(trained(dataset), name=name), config, seed=0)
               for name, dataset in (("with-recovery", with_recovery), ("without-recovery", without_recovery))}
    a, b = results["with-recovery"], results["without-recovery"]
    assert a.config.noise and b.config.noise
    assert [e.spec for e in a.episodes] == [e.spec for e in b.episodes]
    for result in results.values():
        assert 0.0 <= result.success_rate() <= 100.0
        assert len(result.summary()) == 1


@pytest.mark.slow
def test_car_model_on_the_motorcycle(datasets):
    _, dataset = datasets["with-recovery"]
    config = BenchmarkConfig(episodes=2, traffic=("empty",), setups=("training", "new-vehicle"), noise=False,
                             **SHORT)
    result = run_addnoise_benchmark(ModelPlanner(trained(dataset)), config, seed=1)

    moto = [e for e in result.episodes if e.spec.setup == "new-vehicle"]
    assert len(moto) == 2
    assert all(e.spec.profile == "motorcycle" and e.spec.map_id == "town-a" for e in moto)
    assert all(e.trace for e in moto)
    assert all(abs(row["clean_steer"]) <= MOTORCYCLE.max_steer for e in moto for row in e.trace)

    grid = result.success_grid()
    assert list(grid.columns) == ["training", "new-vehicle"]
    gap = grid.loc["empty", "training"] - grid.loc["empty", "new-vehicle"]
    assert gap == result.success_rate(setup="training") - result.success_rate(setup="new-vehicle")
    assert list(result.summary()["reference_success_rate"]) == [93.3, 43.3]


@pytest.mark.slow
def test_heavy_speckle_raises_uncertainty_above_the_clean_threshold():
    """Speckled training frames carry noisy targets, as rain-degraded frames do"""
    n = 16
    rng = np.random.default_rng(0)

    def flat_frames(count):
        levels = rng.uniform(0.2, 0.6, size=count)
        return np.broadcast_to(levels[:, None, None, None, None], (count, 12, 16, 16, 3)).copy()

    clean = flat_frames(n)
    images = np.concatenate([clean, corrupt_observations(clean, seed=1)])
    targets = np.concatenate([0.05 * rng.normal(size=(n, 22, 3)), rng.normal(size=(n, 22, 3))])
    arrays = {"images": images, "motion": np.zeros((2 * n, 12, 3)), "commands": np.zeros(2 * n, dtype=int),
              "targets": targets}
    model = tiny_model("M0", seed=1)
    train(model, ArrayData({"train": arrays, "val": arrays}),
          TrainConfig(lr=2e-2, batch_size=2 * n, eval_every=50, max_steps=300, patience=100), seed=0)

    held_out = flat_frames(40)
    motion, commands = np.zeros((40, 12, 3)), np.zeros(40, dtype=int)
    threshold = calibrate_threshold([scalar_uncertainty(model.predict(held_out, motion, commands).log_var)], 99.0)
    table = corruption_probe(model, held_out, motion, commands, threshold, seed=7)
    assert table["above_threshold"].mean() >= 0.9
