"""
Supervised samples cut from episode logs: 12 ticks of history and 22 ticks of future around a center tick,
expressed in the body frame of the center pose.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from expert.episode import EpisodeLog
from geometry import Pose2D, Trajectory, interpolate_track, world_to_body, HISTORY_LEN, HORIZON
from logger.logger import logger
from sim_world import Command, Weather

BRAKE_SPEED_RATIO = 0.3


class Behavior(str, Enum):
    CRUISE = "cruise"
    BRAKE = "brake"
    RECOVERY = "recovery"


@dataclass(frozen=True, eq=False)
class FrameRecord:
    """
    One training sample.

    motion:  (12, 3) history of (v, x, y), oldest first; the last row is (v_t, 0, 0)
    future:  the 22 ground-truth waypoints after the center tick
    The observation history is the frames of ticks `tick - 11 ... tick` of episode `episode_id`.
    """
    episode_id: str
    tick: int
    weather: Weather
    command: Command
    behavior: Behavior
    motion: np.ndarray
    future: Trajectory
    noise_overlap: bool = False

    def __post_init__(self):
        motion = np.array(self.motion, dtype=np.float64)
        assert motion.shape == (HISTORY_LEN, 3), f"motion history must be ({HISTORY_LEN}, 3), got {motion.shape}"
        motion.setflags(write=False)
        object.__setattr__(self, "motion", motion)
        object.__setattr__(self, "weather", Weather.parse(self.weather))
        object.__setattr__(self, "command", Command(int(self.command)))
        object.__setattr__(self, "behavior", Behavior(self.behavior))

    @property
    def frame_ticks(self) -> Tuple[int, ...]:
        return tuple(range(self.tick - HISTORY_LEN + 1, self.tick + 1))

    @property
    def key(self) -> Tuple[str, int]:
        return self.episode_id, self.tick

    def __eq__(self, other):
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (self.key, self.weather, self.command, self.behavior, self.noise_overlap) == \
            (other.key, other.weather, other.command, other.behavior, other.noise_overlap) \
            and np.array_equal(self.motion, other.motion) and self.future == other.future


def behavior_class(motion: np.ndarray, future: np.ndarray, history_noise: bool,
                   brake_ratio: float = BRAKE_SPEED_RATIO) -> Behavior:
    """
    brake:      the future speed drops below brake_ratio of the current speed
    recovery:   a history tick lies in a noise window
    cruise:     anything else
    """
    v_now = motion[-1, 0]
    if v_now > 0 and future[:, 0].min() < brake_ratio * v_now:
        return Behavior.BRAKE
    if history_noise:
        return Behavior.RECOVERY
    return Behavior.CRUISE


def motion_history(xy: np.ndarray, speeds: np.ndarray, ref: Pose2D) -> np.ndarray:
    """(12, 3) (v, x, y) history in the body frame of ref, the last row pinned to (v_t, 0, 0)"""
    history = np.column_stack([speeds, world_to_body(xy, ref)])
    history[-1, 1:] = 0.0
    return history


def build_records(log: EpisodeLog, brake_ratio: float = BRAKE_SPEED_RATIO) -> List[FrameRecord]:
    """
    Cut every valid center tick of an episode into a FrameRecord.

    History is ticks t-11 ... t, future is ticks t+1 ... t+22. Poses are resampled at the exact frame times
    and expressed in the body frame of the pose at t; speeds are carried over as they are.
    Center ticks whose window touches a collision tick are skipped.

    :param log:         Episode log with commands labeled
    :param brake_ratio: See behavior_class()
    :return:            FrameRecords in tick order; empty (with a warning) for a too-short episode
    """
    n = len(log.records)
    if n < HISTORY_LEN + HORIZON:
        logger.warning(f"Episode {log.episode_id} has {n} ticks, fewer than {HISTORY_LEN + HORIZON}: no records")
        return []
    samples = log.samples
    frame_times = [record.tick * log.dt for record in log.records]
    samples = interpolate_track(samples, [min(max(t, samples[0].t), samples[-1].t) for t in frame_times])
    xy = np.array([[s.pose.x, s.pose.y] for s in samples])
    speeds = np.array([s.speed for s in samples])
    noise = np.array([record.noise_active for record in log.records], dtype=bool)
    crashed = np.array([record.collision is not None for record in log.records], dtype=bool)

    records = []
    for t in range(HISTORY_LEN - 1, n - HORIZON):
        lo, hi = t - HISTORY_LEN + 1, t + HORIZON + 1
        if crashed[lo:hi].any():
            continue
        ref = samples[t].pose
        history = motion_history(xy[lo:t + 1], speeds[lo:t + 1], ref)
        future = np.column_stack([speeds[t + 1:hi], world_to_body(xy[t + 1:hi], ref)])
        records.append(FrameRecord(
            episode_id=log.episode_id, tick=log.records[t].tick, weather=log.weather,
            command=Command(log.records[t].command),
            behavior=behavior_class(history, future, bool(noise[lo:t + 1].any()), brake_ratio),
            motion=history, future=Trajectory(future, log.dt), noise_overlap=bool(noise[lo:hi].any())))
    logger.debug(f"Episode {log.episode_id}: {len(records)} records from {n} ticks")
    return records


def drop_noise_windows(records: List[FrameRecord]) -> List[FrameRecord]:
    """Records whose history or future touches no noise window: the dataset without recovery demonstrations"""
    kept = [record for record in records if not record.noise_overlap]
    logger.info(f"Dropped {len(records) - len(kept)} of {len(records)} records overlapping noise windows")
    return kept
