"""
Collection supervisor: many expert episodes over (weather, index) pairs, run in parallel and merged in
deterministic order.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Tuple

import pandas as pd

from logger.logger import logger
from sim_world import load_map, plan_random_route, Weather, RenderConfig
from expert.driver import ExpertConfig
from expert.episode import collect_episode, save_episode, episode_summary
from utils.exceptions import InvalidArgumentError
from utils.utils import derive_rng

REFERENCE_HOURS = 16.6          # the original collection: 5 weathers x 100 episodes
REFERENCE_KM = 288.7
REFERENCE_EPISODES = 500


@dataclass(frozen=True)
class CollectConfig:
    map_id: str = "town-a"
    weathers: Tuple[str, ...] = tuple(w.value for w in Weather)
    episodes_per_weather: int = 100
    noise: bool = True
    dynamic: bool = True
    profile: str = "car"
    min_route_length: float = 300.0
    max_route_length: float = 1500.0
    expert: ExpertConfig = field(default_factory=ExpertConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    def __post_init__(self):
        if self.episodes_per_weather < 1:
            raise InvalidArgumentError(f"episodes_per_weather must be positive, got {self.episodes_per_weather}")
        for weather in self.weathers:
            Weather.parse(weather)


def episode_seed(seed: int, weather: str, index: int) -> int:
    return int(derive_rng(seed, "episode", weather, index).integers(0, 2 ** 31 - 1))


def _collect_one(task) -> dict:
    config, seed, weather, index, directory = task
    network = load_map(config.map_id)
    ep_seed = episode_seed(seed, weather, index)
    route = plan_random_route(network, derive_rng(ep_seed, "route"), config.min_route_length,
                              config.max_route_length)
    log = collect_episode(network, route, weather, ep_seed, noise=config.noise, dynamic=config.dynamic,
                          profile=config.profile, expert_config=config.expert, render_config=config.render,
                          episode_id=f"{config.map_id}-{weather}-{index:04d}")
    save_episode(log, directory)
    return episode_summary(log)


def collect_episodes(config: CollectConfig, directory: str, seed: int, jobs: int = 1) -> pd.DataFrame:
    """
    Collect config.episodes_per_weather episodes for every weather and write them under `directory`.
    Every episode draws its route, agents and noise from its own stream derived from (seed, weather, index),
    so the output does not depend on `jobs`.

    :return: One summary row per episode, in (weather, index) order
    """
    tasks = [(config, seed, weather, k, directory)
             for weather in config.weathers for k in range(config.episodes_per_weather)]
    logger.info(f"Collecting {len(tasks)} episodes on {config.map_id} with {jobs} job(s)")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows: List[dict] = list(pool.map(_collect_one, tasks))
    else:
        rows = [_collect_one(task) for task in tasks]
    summary = pd.DataFrame(rows)
    hours, km = collection_totals(summary)
    logger.info(f"Collected {len(summary)} episodes: {hours:.2f} h, {km:.2f} km "
                f"(reference collection: {REFERENCE_HOURS} h, {REFERENCE_KM} km over {REFERENCE_EPISODES} episodes)")
    return summary


def collection_totals(summary: pd.DataFrame) -> Tuple[float, float]:
    """(hours, kilometres) driven over a collection summary"""
    if summary.empty:
        return 0.0, 0.0
    return float(summary["duration_s"].sum() / 3600.0), float(summary["distance_m"].sum() / 1000.0)
