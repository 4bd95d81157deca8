"""
Dataset directory:

    manifest.json       DatasetManifest
    records.jsonl       one FrameRecord per line, in index order
    frames/<episode_id>/NNNNNN.ppm
                        every observation referenced by a record, stored once per tick
"""

import json
import os
import shutil
from collections import OrderedDict
from dataclasses import asdict
from typing import Dict, Iterator, List, Mapping, Optional, Sequence

import numpy as np

from dataset.records import FrameRecord
from dataset.split import DatasetManifest, DATASET_FORMAT_VERSION, SPLITS
from expert.episode import EpisodeLog, frame_name, read_frame, write_frame
from geometry import Trajectory
from logger.logger import logger
from utils.exceptions import DatasetLoadError
from utils.utils import write_json, read_json, write_jsonl

MANIFEST_FILE = "manifest.json"
RECORDS_FILE = "records.jsonl"
FRAMES_FOLDER = "frames"


def record_to_dict(index: int, record: FrameRecord) -> dict:
    return {"index": index, "episode_id": record.episode_id, "tick": record.tick,
            "weather": record.weather.value, "command": int(record.command), "behavior": record.behavior.value,
            "noise_overlap": record.noise_overlap, "motion": record.motion, "future": record.future.values,
            "dt": record.future.dt}


def record_from_dict(content: dict) -> FrameRecord:
    return FrameRecord(episode_id=content["episode_id"], tick=content["tick"], weather=content["weather"],
                       command=content["command"], behavior=content["behavior"],
                       motion=np.array(content["motion"], dtype=np.float64),
                       future=Trajectory(np.array(content["future"], dtype=np.float64), content["dt"]),
                       noise_overlap=content["noise_overlap"])


def save_dataset(records: Sequence[FrameRecord], manifest: DatasetManifest, directory: str,
                 logs: Mapping[str, EpisodeLog]) -> None:
    """
    Write a dataset directory. Frames are copied from the episode logs, one file per referenced tick,
    however many records share it.

    :param records:     FrameRecords, indexed as in the manifest
    :param manifest:    DatasetManifest
    :param directory:   Output directory (created)
    :param logs:        {episode_id: EpisodeLog} providing the frames
    """
    os.makedirs(directory, exist_ok=True)
    write_json(os.path.join(directory, MANIFEST_FILE), asdict(manifest))
    write_jsonl(os.path.join(directory, RECORDS_FILE), (record_to_dict(i, r) for i, r in enumerate(records)))

    needed: Dict[str, set] = {}
    for record in records:
        needed.setdefault(record.episode_id, set()).update(record.frame_ticks)
    n_frames = 0
    for episode_id in sorted(needed):
        if episode_id not in logs:
            raise DatasetLoadError(f"No episode log for {episode_id}, referenced by the records")
        log = logs[episode_id]
        folder = os.path.join(directory, FRAMES_FOLDER, episode_id)
        os.makedirs(folder, exist_ok=True)
        for tick in sorted(needed[episode_id]):
            target = os.path.join(folder, frame_name(tick))
            source = None if log.frames_dir is None else os.path.join(log.frames_dir, frame_name(tick))
            if tick >= len(log.frames) and source is not None and os.path.isfile(source):
                shutil.copyfile(source, target)
            else:
                write_frame(target, log.frame(tick))
            n_frames += 1
    logger.info(f"Saved {len(records)} records sharing {n_frames} frames to {directory}")


def load_manifest(path: str) -> DatasetManifest:
    try:
        content = read_json(path)
    except (OSError, ValueError) as e:
        raise DatasetLoadError(f"Cannot read manifest {path}: {e}")
    version = content.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise DatasetLoadError(f"{path}: dataset format {version}, this version reads {DATASET_FORMAT_VERSION}")
    try:
        content["ratios"] = tuple(content["ratios"])
        content["obs_shape"] = tuple(content["obs_shape"])
        content["held_out_weathers"] = tuple(content["held_out_weathers"])
        return DatasetManifest(**content)
    except (KeyError, TypeError) as e:
        raise DatasetLoadError(f"{path}: malformed manifest ({e})")


def load_records(path: str) -> List[FrameRecord]:
    records = []
    offset = 0
    with open(path, "rb") as file:
        for lineno, line in enumerate(file, start=1):
            try:
                content = json.loads(line)
                if content["index"] != len(records):
                    raise ValueError(f"expected index {len(records)}, found {content['index']}")
                records.append(record_from_dict(content))
            except (ValueError, KeyError, TypeError, AssertionError) as e:
                raise DatasetLoadError(f"{path}:{lineno} (byte offset {offset}): corrupt record ({e})")
            offset += len(line)
    return records


class FrameStore:
    """Reads dataset frames on demand, keeping the most recently used ones decoded in memory"""

    def __init__(self, directory: str, capacity: int = 4096):
        self.directory = directory
        self.capacity = capacity
        self._cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()

    def path(self, episode_id: str, tick: int) -> str:
        return os.path.join(self.directory, episode_id, frame_name(tick))

    def frame(self, episode_id: str, tick: int) -> np.ndarray:
        """float64 H x W x 3 in [0, 1]"""
        key = (episode_id, tick)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        pixels = read_frame(self.path(episode_id, tick)).astype(np.float64) / 255.0
        self._cache[key] = pixels
        if len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return pixels


class Dataset:
    """Records, manifest and frames of a dataset directory"""

    def __init__(self, records: List[FrameRecord], manifest: DatasetManifest, frames: Optional[FrameStore] = None):
        self.records = records
        self.manifest = manifest
        self.frames = frames

    def split(self, name: str) -> List[FrameRecord]:
        if name not in SPLITS:
            raise KeyError(f"Unknown split {name}; expected one of {SPLITS}")
        return [self.records[i] for i in self.manifest.splits[name]]

    def observations(self, record: FrameRecord) -> np.ndarray:
        """(12, H, W, 3) observation history of a record"""
        if self.frames is None:
            raise DatasetLoadError("This dataset was loaded without frames")
        return np.stack([self.frames.frame(record.episode_id, tick) for tick in record.frame_ticks])

    def batches(self, name: str, batch_size: int, rng: np.random.Generator = None) -> Iterator[List[FrameRecord]]:
        """Mini-batches of a split, shuffled with rng when given"""
        records = self.split(name)
        order = np.arange(len(records)) if rng is None else rng.permutation(len(records))
        for start in range(0, len(records), batch_size):
            yield [records[i] for i in order[start:start + batch_size]]


def load_dataset(directory: str, cache_frames: int = 4096) -> Dataset:
    """
    Read a dataset directory written by save_dataset()

    :raises DatasetLoadError:   missing files, format version mismatch, corrupt record lines
                                (with file, line and byte offset), or a manifest inconsistent with the records
    """
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    records_path = os.path.join(directory, RECORDS_FILE)
    for path in (manifest_path, records_path):
        if not os.path.isfile(path):
            raise DatasetLoadError(f"{directory} is not a dataset directory: {os.path.basename(path)} missing")
    manifest = load_manifest(manifest_path)
    records = load_records(records_path)
    for name, indices in manifest.splits.items():
        if indices and max(indices) >= len(records):
            raise DatasetLoadError(f"{manifest_path}: split {name} references record {max(indices)}, "
                                   f"only {len(records)} records present")
    logger.info(f"Loaded {len(records)} records from {directory}")
    return Dataset(records, manifest, FrameStore(os.path.join(directory, FRAMES_FOLDER), cache_frames))
