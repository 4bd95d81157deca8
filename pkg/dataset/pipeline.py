from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

from dataset.balance import BalanceQuotas, balance
from dataset.records import FrameRecord, build_records, drop_noise_windows, BRAKE_SPEED_RATIO
from dataset.split import DatasetManifest, split
from dataset.store import save_dataset
from expert.episode import EpisodeLog, load_episode, label_commands
from logger.logger import logger


@dataclass(frozen=True)
class DatasetConfig:
    ratios: Tuple[float, float, float] = (7, 1, 2)
    quotas: BalanceQuotas = field(default_factory=BalanceQuotas)
    brake_ratio: float = BRAKE_SPEED_RATIO
    held_out_weathers: Tuple[str, ...] = ()
    drop_noise_windows: bool = False


def _records_of(task) -> Tuple[EpisodeLog, List[FrameRecord]]:
    folder, brake_ratio = task
    log = label_commands(load_episode(folder))
    return log, build_records(log, brake_ratio)


def build_dataset(episode_folders: Sequence[str], directory: str, config: DatasetConfig = None, seed: int = 0,
                  jobs: int = 1) -> Tuple[List[FrameRecord], DatasetManifest]:
    """
    Episode folders -> records -> (optionally) recovery-free records -> balance -> split -> dataset directory.
    Episodes are processed in folder order regardless of `jobs`.

    :return: (records, manifest) as written
    """
    config = config or DatasetConfig()
    tasks = [(folder, config.brake_ratio) for folder in sorted(episode_folders)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_records_of, tasks))
    else:
        results = [_records_of(task) for task in tasks]

    logs: Dict[str, EpisodeLog] = {log.episode_id: log for log, _ in results}
    records = [record for _, episode_records in results for record in episode_records]
    logger.info(f"Built {len(records)} records from {len(logs)} episodes")
    if config.drop_noise_windows:
        records = drop_noise_windows(records)
    records, report = balance(records, config.quotas, seed)

    obs_shape = (96, 96, 3)
    if records:
        obs_shape = tuple(logs[records[0].episode_id].frame(records[0].tick).shape)
    manifest = split(records, config.ratios, seed, config.held_out_weathers, obs_shape)
    manifest = replace(manifest, balance_report=report.to_dict("records"))
    save_dataset(records, manifest, directory, logs)
    return records, manifest
