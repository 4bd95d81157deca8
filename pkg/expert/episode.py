import json
import os
from dataclasses import dataclass, field, replace, asdict
from typing import List, Optional, Sequence

import imageio.v3 as iio
import numpy as np

from geometry import Pose2D, TimedSample, FRAME_DT
from logger.logger import logger
from sim_world import (Route, Command, RoadNetwork, NoiseSchedule, Weather, RenderConfig,
                       route_command, inject_steer_noise, make_episode_world, step_world, check_collision,
                       render_observation, get_profile, load_map, timeout_for)
from expert.driver import ExpertDriver, ExpertConfig
from utils.exceptions import ExpertLostError, OffRouteError, DatasetLoadError
from utils.utils import write_json, read_json, write_jsonl

EPISODE_FORMAT_VERSION = 1
META_FILE = "meta.json"
TICKS_FILE = "ticks.jsonl"
FRAMES_FOLDER = "frames"


class EpisodeStatus:
    COMPLETED = "completed"
    COLLISION = "collision"
    EXPERT_LOST = "expert_lost"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TickRecord:
    tick: int
    time: float
    x: float
    y: float
    yaw: float
    speed: float
    accel: float                    # applied
    steer: float                    # applied, noise included
    clean_accel: float              # expert reference, never noised
    clean_steer: float
    command: int
    noise_active: bool
    progress: float
    collision: Optional[str] = None

    @property
    def sample(self) -> TimedSample:
        return TimedSample(self.time, Pose2D(self.x, self.y, self.yaw), self.speed)


@dataclass
class EpisodeLog:
    episode_id: str
    map_id: str
    weather: Weather
    route: List[str]
    seed: int
    profile: str
    noise: bool
    dynamic: bool
    dt: float = FRAME_DT
    status: str = EpisodeStatus.COMPLETED
    noise_windows: List[dict] = field(default_factory=list)
    records: List[TickRecord] = field(default_factory=list)
    frames: List[np.ndarray] = field(default_factory=list, compare=False, repr=False)
    frames_dir: Optional[str] = field(default=None, compare=False, repr=False)

    @property
    def duration(self) -> float:
        return self.records[-1].time if self.records else 0.0

    @property
    def distance(self) -> float:
        if len(self.records) < 2:
            return 0.0
        xy = np.array([(r.x, r.y) for r in self.records])
        return float(np.linalg.norm(np.diff(xy, axis=0), axis=1).sum())

    @property
    def samples(self) -> List[TimedSample]:
        return [record.sample for record in self.records]

    def frame(self, tick: int) -> np.ndarray:
        """uint8 H x W x 3 observation of a tick, from memory or from the episode directory"""
        if tick < len(self.frames):
            return self.frames[tick]
        if self.frames_dir is None:
            raise DatasetLoadError(f"Episode {self.episode_id} holds no frame for tick {tick}")
        return read_frame(os.path.join(self.frames_dir, frame_name(tick)))

    def meta(self) -> dict:
        content = asdict(self)
        for key in ("records", "frames", "frames_dir"):
            content.pop(key)
        content["weather"] = self.weather.value
        content["format_version"] = EPISODE_FORMAT_VERSION
        content["n_ticks"] = len(self.records)
        return content


def frame_name(tick: int) -> str:
    return f"{tick:06d}.ppm"


def write_frame(path: str, raster: np.ndarray) -> None:
    iio.imwrite(path, raster, extension=".ppm")


def read_frame(path: str) -> np.ndarray:
    try:
        return np.asarray(iio.imread(path, extension=".ppm"), dtype=np.uint8)
    except (OSError, ValueError) as e:
        raise DatasetLoadError(f"Cannot read frame {path}: {e}")


def collect_episode(network: RoadNetwork, route: Route, weather, seed: int, noise: bool = True,
                    dynamic: bool = True, profile: str = "car", expert_config: ExpertConfig = None,
                    render_config: RenderConfig = None, render: bool = True, episode_id: str = None,
                    max_time: float = None) -> EpisodeLog:
    """
    Drive a route with the expert, optionally disturbed by collection steering noise, recording one
    TickRecord (and one rendered frame) per tick.
    The episode ends at route arrival, at a collision, when the expert loses the route, or at the time limit;
    the log is returned in every case with its status set.

    :param network:         Road network the route lives on
    :param route:           Route to drive
    :param weather:         Weather of the episode
    :param seed:            Episode seed; agents, noise and rain are derived from it
    :param noise:           Inject the collection noise schedule
    :param dynamic:         Spawn roaming agents
    :param profile:         Vehicle profile name
    :param expert_config:   Expert parameters
    :param render_config:   Camera parameters
    :param render:          Keep rendered frames in log.frames
    :param episode_id:      Defaults to "<map>-<weather>-<seed>"
    :param max_time:        Time limit, defaults to timeout_for(route.length)
    :return:                EpisodeLog
    """
    weather = Weather.parse(weather)
    world = make_episode_world(route, get_profile(profile), weather, seed, dynamic)
    schedule = NoiseSchedule.for_collection(seed) if noise else None
    driver = ExpertDriver(route, expert_config)
    max_time = timeout_for(route.length) if max_time is None else max_time
    log = EpisodeLog(episode_id=episode_id or f"{network.name}-{weather.value}-{seed}", map_id=network.name,
                     weather=weather, route=list(route.lane_ids), seed=int(seed), profile=profile,
                     noise=noise, dynamic=dynamic, dt=FRAME_DT)
    status = EpisodeStatus.TIMEOUT
    while world.time <= max_time:
        try:
            action = driver.act(world)
            command = route_command(route, world.ego.pose, s_hint=action.progress)
        except (ExpertLostError, OffRouteError) as e:
            logger.error(f"Episode {log.episode_id} aborted: {e}")
            status = EpisodeStatus.EXPERT_LOST
            break
        steer = inject_steer_noise(schedule, world.time, action.steer)
        event = check_collision(world)
        log.records.append(TickRecord(
            tick=world.tick, time=world.time, x=world.ego.pose.x, y=world.ego.pose.y, yaw=world.ego.pose.yaw,
            speed=world.ego.speed, accel=action.accel, steer=steer, clean_accel=action.accel,
            clean_steer=action.steer, command=int(command), noise_active=schedule is not None and schedule.active_window(world.time) is not None,
            progress=action.progress, collision=None if event is None else event.kind.value))
        if render:
            log.frames.append(render_observation(world, config=render_config).to_uint8())
        if event is not None:
            status = EpisodeStatus.COLLISION
            break
        if driver.arrived():
            status = EpisodeStatus.COMPLETED
            break
        world = step_world(world, (action.accel, steer), FRAME_DT)

    log.status = status
    if schedule is not None:
        log.noise_windows = [asdict(window) for window in schedule.windows_until(log.duration + 1e-9)]
    logger.info(f"Episode {log.episode_id}: {status}, {len(log.records)} ticks, {log.duration:.1f} s, "
                f"{log.distance:.0f} m")
    return log


def label_commands(log: EpisodeLog, network: RoadNetwork = None) -> EpisodeLog:
    """
    Recompute every tick's command from the recorded poses, as the route planner would have issued it.
    Route progress is carried from tick to tick so a route that crosses itself is labeled on the right pass.

    :param log:     Episode with a route
    :param network: Road network of log.map_id (loaded when omitted)
    :return:        A copy of the log with the command field of every record recomputed
    """
    network = network or load_map(log.map_id)
    route = Route(network, log.route)
    s_hint = None
    records = []
    for record in log.records:
        s_hint, _ = route.project((record.x, record.y), s_hint)
        try:
            command = route_command(route, record.sample.pose, s_hint)
        except OffRouteError:
            command = Command.KEEP_STRAIGHT
        records.append(replace(record, command=int(command)))
    return replace(log, records=records)


def save_episode(log: EpisodeLog, directory: str) -> str:
    """
    Write an episode as <directory>/<episode_id>/{meta.json, ticks.jsonl, frames/NNNNNN.ppm}

    :return: The episode folder
    """
    folder = os.path.join(directory, log.episode_id)
    frames_dir = os.path.join(folder, FRAMES_FOLDER)
    os.makedirs(frames_dir, exist_ok=True)
    write_json(os.path.join(folder, META_FILE), log.meta())
    write_jsonl(os.path.join(folder, TICKS_FILE), [asdict(record) for record in log.records])
    for tick, raster in enumerate(log.frames):
        write_frame(os.path.join(frames_dir, frame_name(tick)), raster)
    return folder


def load_episode(folder: str, load_frames: bool = False) -> EpisodeLog:
    """
    Read an episode folder written by save_episode(). Frames stay on disk unless load_frames is set.
    """
    meta_path = os.path.join(folder, META_FILE)
    if not os.path.isfile(meta_path):
        raise DatasetLoadError(f"{folder} is not an episode folder: {META_FILE} missing")
    meta = read_json(meta_path)
    if meta.get("format_version") != EPISODE_FORMAT_VERSION:
        raise DatasetLoadError(f"{meta_path}: unsupported episode format {meta.get('format_version')}")
    records = []
    ticks_path = os.path.join(folder, TICKS_FILE)
    with open(ticks_path) as file:
        for lineno, line in enumerate(file, start=1):
            try:
                records.append(TickRecord(**json.loads(line)))
            except (ValueError, TypeError) as e:
                raise DatasetLoadError(f"{ticks_path}:{lineno}: corrupt tick record ({e})")
    if len(records) != meta["n_ticks"]:
        raise DatasetLoadError(f"{ticks_path}: expected {meta['n_ticks']} ticks, found {len(records)}")
    log = EpisodeLog(episode_id=meta["episode_id"], map_id=meta["map_id"], weather=Weather.parse(meta["weather"]),
                     route=list(meta["route"]), seed=meta["seed"], profile=meta["profile"], noise=meta["noise"],
                     dynamic=meta["dynamic"], dt=meta["dt"], status=meta["status"],
                     noise_windows=list(meta["noise_windows"]), records=records,
                     frames_dir=os.path.join(folder, FRAMES_FOLDER))
    if load_frames:
        log.frames = [log.frame(tick) for tick in range(len(records))]
    return log


def list_episodes(directory: str) -> List[str]:
    """Episode folders under a collection directory, sorted by name"""
    if not os.path.isdir(directory):
        raise DatasetLoadError(f"Episode directory {directory} does not exist")
    return sorted(os.path.join(directory, name) for name in os.listdir(directory)
                  if os.path.isfile(os.path.join(directory, name, META_FILE)))


def noise_tick_mask(log: EpisodeLog) -> np.ndarray:
    return np.array([record.noise_active for record in log.records], dtype=bool)


def collision_ticks(log: EpisodeLog) -> Sequence[int]:
    return [i for i, record in enumerate(log.records) if record.collision is not None]


def is_clean(log: EpisodeLog) -> bool:
    return log.status == EpisodeStatus.COMPLETED and not collision_ticks(log)


def recovery_time(log: EpisodeLog) -> float:
    """Seconds spent inside noise windows"""
    return float(noise_tick_mask(log).sum() * log.dt)


def episode_summary(log: EpisodeLog) -> dict:
    return {"episode_id": log.episode_id, "weather": log.weather.value, "seed": log.seed, "status": log.status,
            "ticks": len(log.records), "duration_s": round(log.duration, 6), "distance_m": round(log.distance, 6),
            "noise_windows": len(log.noise_windows), "noise_s": round(recovery_time(log), 6),
            "collision": next((r.collision for r in log.records if r.collision), None)}

