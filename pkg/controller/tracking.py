"""
Trajectory tracking with two PID loops: steering from the bearing of a preview point on the trajectory,
acceleration from the speed error at that point.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from controller.pid import PidGains, PidState, pid_step
from geometry import Trajectory, Pose2D, FRAME_DT, HORIZON, world_to_body
from sim_world.vehicle import VehicleProfile, VehicleState
from utils.exceptions import StalePlanError, InvalidArgumentError


@dataclass(frozen=True)
class ControllerGains:
    lateral: PidGains
    longitudinal: PidGains
    preview_steps: float = 2.0              # preview offset, in frames
    min_preview_distance: float = 3.0       # meters
    replan_period: float = FRAME_DT


DEFAULT_GAINS: Dict[str, ControllerGains] = {
    "car": ControllerGains(lateral=PidGains(1.0, 0.0, 0.2), longitudinal=PidGains(0.8, 0.05, 0.0, integral_limit=5.0)),
    "motorcycle": ControllerGains(lateral=PidGains(0.7, 0.0, 0.15),
                                  longitudinal=PidGains(1.0, 0.05, 0.0, integral_limit=5.0)),
}


def default_gains(profile_name: str) -> ControllerGains:
    if profile_name not in DEFAULT_GAINS:
        raise InvalidArgumentError(f"No default gains for profile {profile_name}; expected {sorted(DEFAULT_GAINS)}")
    return DEFAULT_GAINS[profile_name]


@dataclass
class TrackerState:
    lateral: PidState = field(default_factory=PidState)
    longitudinal: PidState = field(default_factory=PidState)

    def reset(self) -> None:
        self.lateral.reset()
        self.longitudinal.reset()


def preview_target(traj: Trajectory, speed: float, at: float, min_distance: float = 0.0) -> Tuple[float, float, float]:
    """
    (v, x, y) on the trajectory at time `at` after its origin, moved further along the trajectory until it is
    at least min_distance away. The origin point is (speed, 0, 0).
    """
    t = np.arange(HORIZON + 1) * traj.dt
    v = np.concatenate([[speed], traj.values[:, 0]])
    x = np.concatenate([[0.0], traj.values[:, 1]])
    y = np.concatenate([[0.0], traj.values[:, 2]])
    if min_distance > 0:
        reach = np.hypot(x, y)
        far = np.flatnonzero(reach >= min_distance)
        if far.size:
            at = max(at, float(np.interp(min_distance, reach[:far[0] + 1], t[:far[0] + 1]))
                     if far[0] > 0 else 0.0)
    return float(np.interp(at, t, v)), float(np.interp(at, t, x)), float(np.interp(at, t, y))


def steering_error(x: float, y: float) -> float:
    """Bearing of a body-frame point (x lateral, positive right; y forward). Positive means turn left."""
    if math.hypot(x, y) < 1e-6:
        return 0.0
    return math.atan2(-x, y)


def track_trajectory(traj: Trajectory, state: VehicleState, profile: VehicleProfile, gains: ControllerGains,
                     elapsed: float, tracker: TrackerState, dt: float = FRAME_DT) -> Tuple[float, float]:
    """
    One control step toward a trajectory generated `elapsed` seconds ago in the body frame of the vehicle at
    that time (elapsed = 0 when replanning every tick).

    :return: (accel_cmd, steer_cmd) within the profile limits
    :raises StalePlanError: elapsed outside [0, replan_period)
    """
    if not 0.0 <= elapsed < gains.replan_period:
        raise StalePlanError(f"Trajectory is {elapsed:.3f}s old; replan every {gains.replan_period:.3f}s")
    v_target, x_target, y_target = preview_target(traj, state.speed, elapsed + gains.preview_steps * traj.dt,
                                                  gains.min_preview_distance)
    steer = pid_step(gains.lateral, steering_error(x_target, y_target), dt, tracker.lateral)
    accel = pid_step(gains.longitudinal, v_target - state.speed, dt, tracker.longitudinal)
    return (min(max(accel, -profile.max_decel), profile.max_accel),
            min(max(steer, -profile.max_steer), profile.max_steer))


class TrajectoryTracker:
    """Stateful controller for one episode"""

    def __init__(self, profile: VehicleProfile, gains: ControllerGains = None, dt: float = FRAME_DT):
        self.profile = profile
        self.gains = gains or default_gains(profile.name)
        self.dt = dt
        self.state = TrackerState()

    def reset(self) -> None:
        self.state.reset()

    def __call__(self, traj: Trajectory, vehicle: VehicleState, elapsed: float = 0.0) -> Tuple[float, float]:
        return track_trajectory(traj, vehicle, self.profile, self.gains, elapsed, self.state, self.dt)


def trajectory_from_path(times: Sequence[float], xs: Sequence[float], ys: Sequence[float], speeds: Sequence[float],
                         t: float, pose: Pose2D, dt: float = FRAME_DT) -> Trajectory:
    """
    The part of a recorded world-frame path that follows time t, sampled every dt and expressed in the body
    frame of `pose`; samples past the end of the recording repeat its last point.
    """
    query = t + dt * np.arange(1, HORIZON + 1)
    points = np.stack([np.interp(query, times, xs), np.interp(query, times, ys)], axis=1)
    body = world_to_body(points, pose)
    values = np.column_stack([np.interp(query, times, speeds), body[:, 0], body[:, 1]])
    return Trajectory(values, dt)
