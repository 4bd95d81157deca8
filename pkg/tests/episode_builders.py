"""
Synthetic episode logs and records, built without running the simulator, and a closed-loop trace comparison.
"""

import math

import numpy as np

from dataset import FrameRecord, Behavior
from expert import EpisodeLog, TickRecord
from geometry import FRAME_DT, Trajectory, HISTORY_LEN, HORIZON
from sim_world import Command, Weather


def make_log(xs, ys, yaws, speeds, episode_id="ep-0", weather="clear-day", noise=None, collision_tick=None,
             commands=None, frame_shape=(8, 8, 3)) -> EpisodeLog:
    n = len(xs)
    noise = [False] * n if noise is None else noise
    commands = [0] * n if commands is None else commands
    records = [TickRecord(tick=k, time=k * FRAME_DT, x=float(xs[k]), y=float(ys[k]), yaw=float(yaws[k]),
                          speed=float(speeds[k]), accel=0.0, steer=0.0, clean_accel=0.0, clean_steer=0.0,
                          command=int(commands[k]), noise_active=bool(noise[k]), progress=0.0,
                          collision="agent" if k == collision_tick else None)
               for k in range(n)]
    frames = [np.full(frame_shape, k % 256, dtype=np.uint8) for k in range(n)]
    return EpisodeLog(episode_id=episode_id, map_id="grid", weather=Weather.parse(weather), route=["A0>A1"],
                      seed=0, profile="car", noise=any(noise), dynamic=False, records=records, frames=frames)


def straight_log(n=60, speed=5.0, **kwargs) -> EpisodeLog:
    t = np.arange(n) * FRAME_DT
    return make_log(speed * t, np.zeros(n), np.zeros(n), np.full(n, speed), **kwargs)


def arc_log(n=60, speed=5.0, radius=20.0, **kwargs) -> EpisodeLog:
    """Constant-speed left turn from the origin, heading east at t=0"""
    psi = speed * np.arange(n) * FRAME_DT / radius
    return make_log(radius * np.sin(psi), radius * (1 - np.cos(psi)), psi, np.full(n, speed), **kwargs)


def synthetic_record(episode_id="ep-0", tick=20, weather="clear-day", command=Command.KEEP_STRAIGHT,
                     behavior=Behavior.CRUISE, offset=0.0) -> FrameRecord:
    motion = np.zeros((HISTORY_LEN, 3))
    motion[:, 0] = 5.0
    motion[:, 2] = -5.0 * FRAME_DT * np.arange(HISTORY_LEN - 1, -1, -1)
    future = np.zeros((HORIZON, 3))
    future[:, 0] = 5.0
    future[:, 1] = offset
    future[:, 2] = 5.0 * FRAME_DT * np.arange(1, HORIZON + 1)
    return FrameRecord(episode_id=episode_id, tick=tick, weather=Weather.parse(weather), command=command,
                       behavior=behavior, motion=motion, future=Trajectory(future))


def synthetic_records(n_episodes=10, per_episode=20, weathers=("clear-day",)) -> list:
    out = []
    for e in range(n_episodes):
        weather = weathers[e % len(weathers)]
        for k in range(per_episode):
            out.append(synthetic_record(episode_id=f"ep-{e:02d}", tick=HISTORY_LEN + k, weather=weather,
                                        command=Command(k % 3)))
    return out


def circle_point(radius: float, angle: float):
    """Body-frame (x, y) of the point `angle` radians further along a left circle of the given radius"""
    return -radius * (1 - math.cos(angle)), radius * math.sin(angle)


def saved_dataset(directory: str, n_episodes=10, n_ticks=40, frame_shape=(16, 16, 3), seed=0) -> str:
    """Straight and arc episodes, alternating, saved as a dataset directory"""
    from dataset import build_records, balance, split, save_dataset
    logs = {}
    for e in range(n_episodes):
        log = (straight_log if e % 2 else arc_log)(n=n_ticks, episode_id=f"ep-{e}", frame_shape=frame_shape,
                                                   weather="clear-day" if e % 3 else "rainy-day")
        logs[log.episode_id] = log
    records = [r for log in logs.values() for r in build_records(log)]
    records, _ = balance(records, None, seed)
    save_dataset(records, split(records, seed=seed, obs_shape=frame_shape), directory, logs)
    return directory


def first_trace_difference(trace1: [{}], trace2: [{}], tolerance: float = 0.0):
    """
    Compare two closed-loop traces (one dict per tick) in order.

    :param tolerance:   absolute tolerance for float values; 0 asks for exact equality
    :return:            None when they match, else (tick index, key) of the first difference;
                        key is None when the traces differ in length
    """
    if len(trace1) != len(trace2):
        return min(len(trace1), len(trace2)), None
    for k, (tick1, tick2) in enumerate(zip(trace1, trace2)):
        if tick1.keys() != tick2.keys():
            return k, None
        for key in sorted(tick1):
            a, b = tick1[key], tick2[key]
            if isinstance(a, float) and isinstance(b, float):
                if not (a == b or abs(a - b) <= tolerance or (math.isnan(a) and math.isnan(b))):
                    return k, key
            elif a != b:
                return k, key
    return None
