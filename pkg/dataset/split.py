from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from dataset.balance import command_name
from dataset.records import FrameRecord
from geometry import FRAME_DT
from logger.logger import logger
from sim_world import Weather
from utils.exceptions import InvalidArgumentError
from utils.utils import derive_rng

SPLITS = ("train", "val", "test")
DATASET_FORMAT_VERSION = 1


@dataclass
class DatasetManifest:
    """Record indices per split plus the statistics needed to describe the dataset"""
    splits: Dict[str, List[int]]
    episodes: Dict[str, List[str]]
    counts: Dict[str, Dict[str, Dict[str, int]]]
    ratios: Tuple[float, float, float]
    seed: int
    dt: float = FRAME_DT
    obs_shape: Tuple[int, int, int] = (96, 96, 3)
    held_out_weathers: Tuple[str, ...] = ()
    balance_report: List[dict] = field(default_factory=list)
    format_version: int = DATASET_FORMAT_VERSION

    def split_of(self, index: int) -> str:
        for name, indices in self.splits.items():
            if index in indices:
                return name
        raise KeyError(index)


def split_counts(records: Sequence[FrameRecord], indices: Sequence[int]) -> Dict[str, Dict[str, int]]:
    """{"weather": {weather: n}, "command": {command: n}} over the given record indices"""
    weather = {w.value: 0 for w in Weather}
    command: Dict[str, int] = {}
    for i in indices:
        weather[records[i].weather.value] += 1
        name = command_name(records[i].command)
        command[name] = command.get(name, 0) + 1
    return {"weather": weather, "command": dict(sorted(command.items()))}


def split(records: Sequence[FrameRecord], ratios=(7, 1, 2), seed: int = 0, held_out_weathers: Sequence = (),
          obs_shape=(96, 96, 3)) -> DatasetManifest:
    """
    Assign whole episodes to train / val / test.

    Episodes are visited in a seeded random order; each goes to the split whose share of the running record
    count is not yet reached, so the record ratios are met within one episode's worth of records.
    Episodes recorded in a held-out weather go to test only and do not count toward the ratios.

    :param records:             FrameRecords, indexed by position
    :param ratios:              (train, val, test) weights
    :param seed:                Run seed
    :param held_out_weathers:   Weathers reserved for the test split
    :param obs_shape:           Observation shape recorded in the manifest
    :return:                    DatasetManifest
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise InvalidArgumentError(f"Split ratios must be three nonnegative weights, got {ratios}")
    held_out = {Weather.parse(w).value for w in held_out_weathers}
    by_episode: Dict[str, List[int]] = {}
    weather_of: Dict[str, str] = {}
    for i, record in enumerate(records):
        by_episode.setdefault(record.episode_id, []).append(i)
        weather_of[record.episode_id] = record.weather.value

    pool = sorted(e for e in by_episode if weather_of[e] not in held_out)
    reserved = sorted(e for e in by_episode if weather_of[e] in held_out)
    if len(pool) < 10:
        logger.warning(f"Splitting only {len(pool)} episodes; expect empty or lopsided splits")
    order = [pool[i] for i in derive_rng(seed, "split").permutation(len(pool))]

    total = sum(len(by_episode[e]) for e in pool)
    bounds = np.cumsum(ratios) * total
    scale = sum(ratios)
    episodes = {name: [] for name in SPLITS}
    running = 0
    for episode in order:
        slot = min(int(np.searchsorted(bounds, running * scale, side="right")), 2)
        episodes[SPLITS[slot]].append(episode)
        running += len(by_episode[episode])
    episodes["test"].extend(reserved)

    splits = {name: sorted(i for e in episodes[name] for i in by_episode[e]) for name in SPLITS}
    manifest = DatasetManifest(splits=splits, episodes={k: sorted(v) for k, v in episodes.items()},
                               counts={name: split_counts(records, splits[name]) for name in SPLITS},
                               ratios=tuple(float(r) for r in ratios), seed=int(seed),
                               obs_shape=tuple(obs_shape), held_out_weathers=tuple(sorted(held_out)))
    logger.info("Split records: " + ", ".join(f"{name} {len(splits[name])} ({len(episodes[name])} episodes)"
                                              for name in SPLITS))
    return manifest
