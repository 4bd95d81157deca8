"""
Closed-loop benchmark with periodic steering disturbances.

Every cell of the task grid (traffic x setup) drives a number of goal-directed episodes on new random routes.
Per tick: render -> motion history -> plan (command from the route planner) -> PID tracking -> steering noise ->
world step. An episode succeeds when it reaches its destination before the time limit without a collision and
without leaving its route.
"""

import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from controller import TrajectoryTracker, ControllerGains, DEFAULT_GAINS
from dataset import motion_history
from evaluation.planners import Planner, ModelPlanner
from evaluation.uncertainty import scalar_uncertainty, UNCERTAINTY_SUMMARIES
from expert import expert_action
from geometry import FRAME_DT, HISTORY_LEN
from logger.logger import logger
from sim_world import (Route, Weather, RenderConfig, NoiseSchedule, load_map, plan_random_route,
                       route_command, make_episode_world, step_world, check_collision, render_observation,
                       inject_steer_noise, get_profile, timeout_for)
from utils import derive_rng, write_json, write_jsonl
from utils.exceptions import (InvalidArgumentError, ConfigError, ShapeMismatchError, OffRouteError, OutOfRangeError,
                              ExpertLostError)

TRAFFIC = ("empty", "dynamic")
SETUPS = ("training", "new-vehicle", "new-vehicle-and-town")
REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
TRACES_FOLDER = "traces"

# Reference success rates (%) of the published model, for side-by-side reporting only
REFERENCE_SUCCESS = {
    ("empty", "training"): 93.3, ("dynamic", "training"): 75.0,
    ("empty", "new-vehicle"): 43.3, ("dynamic", "new-vehicle"): 40.0,
    ("empty", "new-vehicle-and-town"): 35.0, ("dynamic", "new-vehicle-and-town"): 33.3,
}


class Outcome:
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    OFF_ROUTE = "off_route"


@dataclass(frozen=True)
class BenchmarkConfig:
    episodes: int = 30                              # per task cell
    traffic: Tuple[str, ...] = TRAFFIC
    setups: Tuple[str, ...] = SETUPS
    weathers: Tuple[str, ...] = tuple(w.value for w in Weather)
    training_map: str = "town-a"
    new_map: str = "town-b"
    training_profile: str = "car"
    new_profile: str = "motorcycle"
    noise: bool = True
    min_route_length: float = 200.0
    max_route_length: float = 600.0
    vehicles_per_km: float = 6.0
    pedestrians_per_km: float = 6.0
    arrival_margin: float = 2.0
    uncertainty_summary: str = "max"
    takeover_threshold: Optional[float] = None      # hand control to the expert above this uncertainty
    min_success_rate: Optional[float] = None        # gate, in percent, on the training/empty cell
    render: Optional[RenderConfig] = None           # defaults to the model's image size
    gains: Dict[str, ControllerGains] = field(default_factory=lambda: dict(DEFAULT_GAINS))

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError(f"benchmark.episodes must be positive, got {self.episodes}")
        for value in self.traffic:
            if value not in TRAFFIC:
                raise ConfigError(f"Unknown traffic `{value}`; expected {TRAFFIC}")
        for value in self.setups:
            if value not in SETUPS:
                raise ConfigError(f"Unknown setup `{value}`; expected {SETUPS}")
        for weather in self.weathers:
            Weather.parse(weather)
        if self.uncertainty_summary not in UNCERTAINTY_SUMMARIES:
            raise ConfigError(f"Unknown uncertainty summary `{self.uncertainty_summary}`")
        if not 0 < self.min_route_length <= self.max_route_length:
            raise ConfigError(f"Invalid route lengths {self.min_route_length}, {self.max_route_length}")

    def conditions(self, setup: str) -> Tuple[str, str]:
        """(map id, vehicle profile) of a setup"""
        return {"training": (self.training_map, self.training_profile),
                "new-vehicle": (self.training_map, self.new_profile),
                "new-vehicle-and-town": (self.new_map, self.new_profile)}[setup]


BENCHMARK_PRESETS = {"desk": {"episodes": 30}, "full": {"episodes": 60}}


def benchmark_preset(name: str, **overrides) -> BenchmarkConfig:
    if name not in BENCHMARK_PRESETS:
        raise ConfigError(f"Unknown benchmark preset `{name}`; expected {sorted(BENCHMARK_PRESETS)}")
    return BenchmarkConfig(**{**BENCHMARK_PRESETS[name], **overrides})


@dataclass(frozen=True)
class EpisodeSpec:
    episode_id: str
    traffic: str
    setup: str
    index: int
    seed: int
    map_id: str
    profile: str
    weather: str
    lanes: Tuple[str, ...]
    route_length: float


@dataclass
class EpisodeResult:
    spec: EpisodeSpec
    success: bool
    cause: str
    end_time: float
    distance: float
    collision_kind: Optional[str] = None
    takeover: bool = False
    takeover_ticks: int = 0
    trace: List[dict] = field(default_factory=list, repr=False)

    @property
    def episode_id(self) -> str:
        return self.spec.episode_id

    def row(self) -> dict:
        return {**asdict(self.spec), "success": self.success, "cause": self.cause, "end_time": self.end_time,
                "distance": self.distance, "collision_kind": self.collision_kind, "takeover": self.takeover,
                "takeover_ticks": self.takeover_ticks, "n_ticks": len(self.trace)}


def episode_specs(config: BenchmarkConfig, seed: int) -> List[EpisodeSpec]:
    """Every episode of the task grid, its route and weather drawn from (seed, traffic, setup, index)"""
    specs = []
    for traffic in config.traffic:
        for setup in config.setups:
            map_id, profile = config.conditions(setup)
            network = load_map(map_id)
            for index in range(config.episodes):
                ep_seed = int(derive_rng(seed, "benchmark", traffic, setup, index).integers(0, 2 ** 31 - 1))
                route = plan_random_route(network, derive_rng(ep_seed, "route"), config.min_route_length,
                                          config.max_route_length)
                specs.append(EpisodeSpec(episode_id=f"{traffic}-{setup}-{index:03d}", traffic=traffic, setup=setup,
                                         index=index, seed=ep_seed, map_id=map_id, profile=profile,
                                         weather=config.weathers[index % len(config.weathers)],
                                         lanes=tuple(route.lane_ids), route_length=route.length))
    return specs


def _render_config(planner: Planner, config: BenchmarkConfig) -> Optional[RenderConfig]:
    if not planner.needs_observations:
        return None
    h, w = planner.image_size
    if config.render is None:
        return RenderConfig(height=h, width=w)
    if (config.render.height, config.render.width) != (h, w):
        raise ShapeMismatchError(f"Benchmark renders {config.render.height}x{config.render.width} observations but "
                                 f"model {planner.name} expects {h}x{w}")
    return config.render


def run_episode(spec: EpisodeSpec, planner: Planner, config: BenchmarkConfig,
                takeover_threshold: Optional[float] = None) -> EpisodeResult:
    """
    Drive one episode with a planner.

    :param spec:                episode to drive
    :param planner:             trajectory source
    :param config:              benchmark parameters (noise, traffic density, gains, arrival margin)
    :param takeover_threshold:  when set, ticks whose uncertainty exceeds it are driven by the expert
    :return:                    EpisodeResult with one trace entry per tick
    """
    route = Route(load_map(spec.map_id), spec.lanes)
    profile = get_profile(spec.profile)
    render = _render_config(planner, config)
    world = make_episode_world(route, profile, spec.weather, spec.seed, spec.traffic == "dynamic",
                               config.vehicles_per_km, config.pedestrians_per_km)
    schedule = NoiseSchedule.for_benchmark(spec.seed) if config.noise else None
    tracker = TrajectoryTracker(profile, config.gains.get(profile.name))
    planner.reset(route)
    frames = deque(maxlen=HISTORY_LEN)
    track = deque(maxlen=HISTORY_LEN)
    max_time = timeout_for(route.length)
    progress, trace, takeovers = None, [], 0
    cause, collision_kind = Outcome.TIMEOUT, None

    while world.time <= max_time:
        ego = world.ego
        try:
            progress, _ = route.project(ego.pose.position, progress)
            command = route_command(route, ego.pose, s_hint=progress)
        except OffRouteError as e:
            logger.info(f"Episode {spec.episode_id}: {e}")
            cause = Outcome.OFF_ROUTE
            break
        event = check_collision(world)
        if event is not None:
            cause, collision_kind = Outcome.COLLISION, event.kind.value
            break
        if progress >= route.length - config.arrival_margin:
            cause = Outcome.SUCCESS
            break

        images = None
        if render is not None:
            try:
                frames.append(render_observation(world, config=render).pixels)
            except OutOfRangeError as e:
                logger.info(f"Episode {spec.episode_id}: {e}")
                cause = Outcome.OFF_ROUTE
                break
            while len(frames) < HISTORY_LEN:
                frames.appendleft(frames[0])
            images = np.stack(frames)
        track.append((ego.pose.x, ego.pose.y, ego.speed))
        while len(track) < HISTORY_LEN:
            track.appendleft(track[0])
        history = np.array(track)
        motion = motion_history(history[:, :2], history[:, 2], ego.pose)

        plan = planner.plan(world, images, motion, command)
        u = None if plan.log_var is None else scalar_uncertainty(plan.log_var, config.uncertainty_summary)
        took_over = False
        if takeover_threshold is not None and u is not None and u > takeover_threshold:
            try:
                action = expert_action(world, route, s_hint=progress)
                accel, steer, took_over = action.accel, action.steer, True
                takeovers += 1
            except ExpertLostError:
                accel, steer = tracker(plan.trajectory, ego)
        else:
            accel, steer = tracker(plan.trajectory, ego)
        clean_steer, steer = steer, inject_steer_noise(schedule, world.time, steer)
        trace.append({"tick": world.tick, "time": world.time, "x": ego.pose.x, "y": ego.pose.y, "yaw": ego.pose.yaw,
                      "speed": ego.speed, "command": int(command), "accel": accel, "steer": steer,
                      "clean_steer": clean_steer,
                      "noise": schedule is not None and schedule.active_window(world.time) is not None,
                      "progress": progress, "uncertainty": u, "takeover": took_over})
        world = step_world(world, (accel, steer), FRAME_DT)

    distance = float(np.sum(np.hypot(np.diff([t["x"] for t in trace]), np.diff([t["y"] for t in trace])))) \
        if len(trace) > 1 else 0.0
    result = EpisodeResult(spec=spec, success=cause == Outcome.SUCCESS, cause=cause, end_time=world.time,
                           distance=distance, collision_kind=collision_kind,
                           takeover=takeover_threshold is not None, takeover_ticks=takeovers, trace=trace)
    logger.info(f"Episode {spec.episode_id} ({spec.map_id}, {spec.profile}, {spec.weather}): {cause} after "
                f"{result.end_time:.1f} s, {distance:.0f} of {route.length:.0f} m")
    return result


_PLANNERS: Dict[str, Planner] = {}


def _resolve(planner: Union[Planner, str]) -> Planner:
    """Planners are passed to worker processes as checkpoint paths and loaded once per process"""
    if isinstance(planner, Planner):
        return planner
    if planner not in _PLANNERS:
        _PLANNERS[planner] = ModelPlanner.from_checkpoint(planner)
    return _PLANNERS[planner]


def _run_task(task) -> EpisodeResult:
    spec, planner, config, threshold = task
    return run_episode(spec, _resolve(planner), config, threshold)


@dataclass
class BenchmarkResult:
    model: str
    has_uncertainty: bool
    config: BenchmarkConfig
    seed: int
    episodes: List[EpisodeResult]
    takeover_episodes: List[EpisodeResult] = field(default_factory=list)

    def episode_table(self, takeover: bool = False) -> pd.DataFrame:
        return pd.DataFrame([e.row() for e in (self.takeover_episodes if takeover else self.episodes)])

    def success_rate(self, traffic: str = None, setup: str = None, takeover: bool = False) -> float:
        episodes = [e for e in (self.takeover_episodes if takeover else self.episodes)
                    if traffic in (None, e.spec.traffic) and setup in (None, e.spec.setup)]
        if not episodes:
            return float("nan")
        return 100.0 * sum(e.success for e in episodes) / len(episodes)

    def success_grid(self) -> pd.DataFrame:
        """Success rate (%) with traffic as rows and setups as columns"""
        return pd.DataFrame([[self.success_rate(t, s) for s in self.config.setups] for t in self.config.traffic],
                            index=list(self.config.traffic), columns=list(self.config.setups))

    def summary(self) -> pd.DataFrame:
        """One row per task cell: counts per outcome, success rate, reference rate, takeover results when run"""
        rows = []
        for traffic in self.config.traffic:
            for setup in self.config.setups:
                cell = [e for e in self.episodes if (e.spec.traffic, e.spec.setup) == (traffic, setup)]
                row = {"traffic": traffic, "setup": setup, "episodes": len(cell),
                       "successes": sum(e.success for e in cell),
                       "success_rate": self.success_rate(traffic, setup),
                       "reference_success_rate": REFERENCE_SUCCESS.get((traffic, setup), float("nan"))}
                for cause in (Outcome.COLLISION, Outcome.TIMEOUT, Outcome.OFF_ROUTE):
                    row[cause] = sum(e.cause == cause for e in cell)
                if self.takeover_episodes:
                    row.update(self._takeover_cell(traffic, setup))
                rows.append(row)
        return pd.DataFrame(rows)

    def _takeover_cell(self, traffic: str, setup: str) -> dict:
        plain = {e.episode_id: e for e in self.episodes if (e.spec.traffic, e.spec.setup) == (traffic, setup)}
        helped = [e for e in self.takeover_episodes if e.episode_id in plain]
        ticks = sum(len(e.trace) for e in helped)
        return {"success_rate_with_takeover": self.success_rate(traffic, setup, takeover=True),
                "takeover_rate": sum(e.takeover_ticks for e in helped) / ticks if ticks else 0.0,
                "failures_avoided": sum(e.success and not plain[e.episode_id].success for e in helped)}

    def passes_gate(self) -> bool:
        if self.config.min_success_rate is None:
            return True
        rate = self.success_rate(self.config.traffic[0], self.config.setups[0])
        return rate >= self.config.min_success_rate

    def to_dict(self) -> dict:
        return {"model": self.model, "has_uncertainty": self.has_uncertainty, "seed": self.seed,
                "config": asdict(self.config), "summary": self.summary().to_dict("records"),
                "episodes": [e.row() for e in self.episodes],
                "takeover_episodes": [e.row() for e in self.takeover_episodes]}

    def save(self, directory: str) -> str:
        """report.json, summary.csv and one traces/<episode>.jsonl per episode"""
        os.makedirs(os.path.join(directory, TRACES_FOLDER), exist_ok=True)
        write_json(os.path.join(directory, REPORT_FILE), self.to_dict())
        self.summary().to_csv(os.path.join(directory, SUMMARY_FILE), index=False)
        for episode in self.episodes:
            write_jsonl(os.path.join(directory, TRACES_FOLDER, f"{episode.episode_id}.jsonl"), episode.trace)
        for episode in self.takeover_episodes:
            write_jsonl(os.path.join(directory, TRACES_FOLDER, f"{episode.episode_id}-takeover.jsonl"),
                        episode.trace)
        return directory


def run_addnoise_benchmark(planner: Union[Planner, str], config: BenchmarkConfig = None, seed: int = 0,
                           output_dir: str = None, jobs: int = 1) -> BenchmarkResult:
    """
    Run the whole task grid.

    :param planner:     a Planner, or the path of a model checkpoint
    :param config:      benchmark parameters
    :param seed:        base seed; every episode derives its own from it, so results do not depend on `jobs`
    :param output_dir:  when given, the result is saved there
    :param jobs:        worker processes
    :return:            BenchmarkResult, episodes in grid order
    """
    config = config or BenchmarkConfig()
    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be positive, got {jobs}")
    resolved = _resolve(planner)
    if resolved.needs_observations:
        _render_config(resolved, config)
    specs = episode_specs(config, seed)
    thresholds = [None] if config.takeover_threshold is None else [None, config.takeover_threshold]
    if config.takeover_threshold is not None and not resolved.has_uncertainty:
        raise ConfigError(f"Takeover needs an uncertainty-producing model; {resolved.name} has none")
    tasks = [(spec, planner, config, threshold) for threshold in thresholds for spec in specs]
    logger.info(f"Benchmark: {len(specs)} episodes over {len(config.traffic)} x {len(config.setups)} cells "
                f"with {resolved.name}, {jobs} job(s)")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(task) for task in tasks]
    result = BenchmarkResult(model=resolved.name, has_uncertainty=resolved.has_uncertainty, config=config,
                             seed=seed, episodes=results[:len(specs)], takeover_episodes=results[len(specs):])
    for traffic in config.traffic:
        for setup in config.setups:
            logger.info(f"{traffic}/{setup}: {result.success_rate(traffic, setup):.1f}% success "
                        f"(reference {REFERENCE_SUCCESS[(traffic, setup)]}%)")
    if output_dir:
        result.save(output_dir)
    return result
