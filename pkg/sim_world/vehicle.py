"""
Kinematic bicycle vehicles. The state is referenced at the rear axle.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from geometry import Pose2D
from utils.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class VehicleProfile:
    name: str
    wheelbase: float
    max_steer: float
    max_accel: float
    max_decel: float
    length: float
    width: float
    height: float = 1.5

    def __post_init__(self):
        for field in ("wheelbase", "max_steer", "max_accel", "max_decel", "length", "width", "height"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"VehicleProfile.{field} must be positive, got {value}")
        if self.max_steer >= math.pi / 2:
            raise InvalidArgumentError(f"max_steer must be below pi/2, got {self.max_steer}")

    @property
    def min_turning_radius(self) -> float:
        return self.wheelbase / math.tan(self.max_steer)

    @property
    def rear_overhang(self) -> float:
        """Distance from the rear axle back to the rear bumper"""
        return (self.length - self.wheelbase) / 2.0


CAR = VehicleProfile(name="car", wheelbase=2.7, max_steer=0.61, max_accel=3.0, max_decel=6.0,
                     length=4.5, width=1.9, height=1.5)
MOTORCYCLE = VehicleProfile(name="motorcycle", wheelbase=1.4, max_steer=0.79, max_accel=4.0, max_decel=7.0,
                            length=2.2, width=0.8, height=1.4)
PROFILES = {profile.name: profile for profile in (CAR, MOTORCYCLE)}


def get_profile(name: str) -> VehicleProfile:
    if name not in PROFILES:
        raise InvalidArgumentError(f"Unknown vehicle profile `{name}`; expected one of {sorted(PROFILES)}")
    return PROFILES[name]


@dataclass(frozen=True)
class VehicleState:
    pose: Pose2D
    speed: float = 0.0
    steer: float = 0.0

    def __post_init__(self):
        if not self.speed >= 0:
            raise InvalidArgumentError(f"VehicleState speed must be nonnegative, got {self.speed}")


def step_vehicle(state: VehicleState, accel_cmd: float, steer_cmd: float, dt: float,
                 profile: VehicleProfile) -> VehicleState:
    """
    One explicit Euler step of the kinematic bicycle model.
    Commands are clipped to the profile limits before integration; speed is floored at 0.

    :param state:       Current state (rear axle pose, speed, steer)
    :param accel_cmd:   Requested longitudinal acceleration, m/s^2
    :param steer_cmd:   Requested front-wheel steering angle, rad (positive turns left)
    :param dt:          Step length, s
    :param profile:     Vehicle limits and geometry
    :return:            The next VehicleState
    """
    if not (math.isfinite(accel_cmd) and math.isfinite(steer_cmd)):
        raise InvalidArgumentError(f"Non-finite vehicle command: accel={accel_cmd}, steer={steer_cmd}")
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")

    steer = min(max(steer_cmd, -profile.max_steer), profile.max_steer)
    accel = min(max(accel_cmd, -profile.max_decel), profile.max_accel)
    pose, v = state.pose, state.speed

    x = pose.x + v * math.cos(pose.yaw) * dt
    y = pose.y + v * math.sin(pose.yaw) * dt
    yaw = pose.yaw + v * math.tan(steer) / profile.wheelbase * dt
    speed = max(0.0, v + accel * dt)
    if v == 0.0:
        return replace(state, speed=speed, steer=steer)
    return VehicleState(Pose2D(x, y, yaw), speed, steer)


def footprint(pose: Pose2D, length: float, width: float, rear_overhang: float = None) -> np.ndarray:
    """
    Corners of a vehicle (or any box) footprint in world coordinates, counterclockwise.

    :param pose:            Reference pose; for vehicles the rear axle
    :param length:          Box length along the heading
    :param width:           Box width
    :param rear_overhang:   How far the box extends behind the reference point (default: centered box)
    :return:                (4, 2) array
    """
    back = length / 2.0 if rear_overhang is None else rear_overhang
    front = length - back
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    fwd = np.array([c, s])
    left = np.array([-s, c])
    p = pose.position
    hw = width / 2.0
    return np.array([p - back * fwd - hw * left,
                     p + front * fwd - hw * left,
                     p + front * fwd + hw * left,
                     p - back * fwd + hw * left])


def vehicle_footprint(state: VehicleState, profile: VehicleProfile) -> np.ndarray:
    return footprint(state.pose, profile.length, profile.width, profile.rear_overhang)
