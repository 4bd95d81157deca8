import json
import os

import pandas as pd
import pytest

from evaluation import (BenchmarkConfig, EpisodeSpec, ExpertReplayPlanner, NullPlanner, ModelPlanner, Outcome,
                        run_addnoise_benchmark, run_episode, episode_specs, benchmark_preset, timeout_for)
from sim_world import NoiseSchedule, RenderConfig, load_map, plan_route
from tests.episode_builders import first_trace_difference
from tests.model_builders import tiny_model
from utils.exceptions import ShapeMismatchError, ConfigError

SHORT = dict(min_route_length=150.0, max_route_length=250.0)


def turning_spec(traffic="empty") -> EpisodeSpec:
    route = plan_route(load_map("town-a"), "A0>A1", "A1>B1")
    assert route.turns
    return EpisodeSpec(episode_id="turn", traffic=traffic, setup="training", index=0, seed=5, map_id="town-a",
                       profile="car", weather="clear-day", lanes=tuple(route.lane_ids), route_length=route.length)


def test_time_limit():
    assert timeout_for(300.0) == pytest.approx(300.0 / (0.5 * 40.0 / 3.6) + 10.0)
    assert timeout_for(300.0) == pytest.approx(64.0, abs=0.1)
    assert timeout_for(0.0) == 10.0
    assert timeout_for(600.0) - 10.0 == pytest.approx(2 * (timeout_for(300.0) - 10.0))


def test_presets():
    assert benchmark_preset("desk").episodes == 30
    assert benchmark_preset("full").episodes == 60
    with pytest.raises(ConfigError):
        benchmark_preset("huge")
    with pytest.raises(ConfigError):
        BenchmarkConfig(traffic=("rush-hour",))


def test_task_grid():
    specs = episode_specs(BenchmarkConfig(episodes=2, **SHORT), seed=3)
    assert len(specs) == 2 * 3 * 2
    assert [(s.traffic, s.setup) for s in specs[:6]] == [("empty", "training")] * 2 + \
        [("empty", "new-vehicle")] * 2 + [("empty", "new-vehicle-and-town")] * 2
    assert {s.map_id for s in specs if s.setup == "new-vehicle-and-town"} == {"town-b"}
    assert {s.profile for s in specs if s.setup != "training"} == {"motorcycle"}
    assert specs == episode_specs(BenchmarkConfig(episodes=2, **SHORT), seed=3)


def test_null_planner_fails_on_a_turn():
    result = run_episode(turning_spec(), NullPlanner(), BenchmarkConfig(noise=False))
    assert not result.success
    assert result.cause in (Outcome.COLLISION, Outcome.TIMEOUT, Outcome.OFF_ROUTE)


def test_noise_offset_reaches_the_vehicle_for_the_whole_window():
    spec = turning_spec()
    result = run_episode(spec, ExpertReplayPlanner(), BenchmarkConfig())
    schedule = NoiseSchedule.for_benchmark(spec.seed)
    noisy = [row for row in result.trace if row["noise"]]
    assert len(noisy) > 1
    for row in result.trace:
        window = schedule.active_window(row["time"])
        if row["noise"]:
            assert row["steer"] - row["clean_steer"] == pytest.approx(window.offset, abs=1e-12)
        else:
            assert row["steer"] == row["clean_steer"]


def test_expert_replay_completes_noise_free_episodes(tmp_path):
    config = BenchmarkConfig(episodes=2, traffic=("empty",), setups=("training",), noise=False, **SHORT)
    result = run_addnoise_benchmark(ExpertReplayPlanner(), config, seed=1, output_dir=str(tmp_path))
    assert [e.cause for e in result.episodes] == [Outcome.SUCCESS] * 2
    assert result.success_rate() == 100.0
    assert result.success_grid().loc["empty", "training"] == 100.0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["model"] == "expert-replay"
    summary = pd.read_csv(tmp_path / "summary.csv")
    assert summary.loc[0, "success_rate"] == 100.0
    assert summary.loc[0, "reference_success_rate"] == 93.3
    traces = sorted(os.listdir(tmp_path / "traces"))
    assert traces == ["empty-training-000.jsonl", "empty-training-001.jsonl"]


def test_benchmark_is_deterministic_and_job_independent():
    config = BenchmarkConfig(episodes=1, setups=("training",), **SHORT)
    a = run_addnoise_benchmark(NullPlanner(), config, seed=2)
    b = run_addnoise_benchmark(NullPlanner(), config, seed=2, jobs=2)
    assert a.episode_table().equals(b.episode_table())
    for x, y in zip(a.episodes, b.episodes):
        assert first_trace_difference(x.trace, y.trace) is None, x.episode_id
    for episode in a.episodes:
        assert episode.cause in (Outcome.SUCCESS, Outcome.COLLISION, Outcome.TIMEOUT, Outcome.OFF_ROUTE)


def test_observation_size_must_match_the_model():
    planner = ModelPlanner(tiny_model("M0"))
    config = BenchmarkConfig(episodes=1, render=RenderConfig(height=32, width=32), **SHORT)
    with pytest.raises(ShapeMismatchError):
        run_addnoise_benchmark(planner, config)


def test_takeover_needs_uncertainty():
    config = BenchmarkConfig(episodes=1, takeover_threshold=1.0, **SHORT)
    with pytest.raises(ConfigError):
        run_addnoise_benchmark(ModelPlanner(tiny_model("M1")), config)


@pytest.mark.slow
def test_model_episode_with_full_takeover():
    planner = ModelPlanner(tiny_model("M0", seed=1))
    config = BenchmarkConfig(episodes=1, traffic=("empty",), setups=("training",), noise=False,
                             takeover_threshold=0.0, **SHORT)
    result = run_addnoise_benchmark(planner, config, seed=4)
    helped = result.takeover_episodes[0]
    assert helped.takeover_ticks == len(helped.trace)
    assert all(tick["uncertainty"] > 0 for tick in helped.trace)
    assert helped.success
    summary = result.summary()
    assert {"success_rate_with_takeover", "takeover_rate", "failures_avoided"} <= set(summary.columns)
    assert summary.loc[0, "takeover_rate"] == 1.0
