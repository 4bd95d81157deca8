"""
Frames, poses and trajectories.

Body frame convention: x is lateral (right of heading positive), y is longitudinal (forward positive).
World frame: x east, y north, yaw counterclockwise from the world +x axis, normalized into (-pi, pi].
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from utils.exceptions import InvalidArgumentError, OutOfRangeError

HISTORY_LEN = 12
HORIZON = 22
FRAME_DT = 3.0 / 22.0           # one tick; 22 ticks span exactly the 3 s preview horizon
TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """
    Map an angle onto (-pi, pi], keeping it congruent modulo 2*pi.

    EXAMPLES:   normalize_angle(3 * pi) == pi
                normalize_angle(-3.5 * pi) == 0.5 * pi

    :param a:   Angle in radians
    :return:    The equivalent angle in (-pi, pi]
    """
    if not math.isfinite(a):
        raise InvalidArgumentError(f"normalize_angle() needs a finite angle, got {a}")
    return a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized normalize_angle()"""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("normalize_angles() needs finite angles")
    return a - TWO_PI * np.ceil((a - math.pi) / TWO_PI)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)], dtype=np.float64)


@dataclass(frozen=True)
class TimedSample:
    t: float
    pose: Pose2D
    speed: float

    def __post_init__(self):
        if not self.speed >= 0.0:
            raise InvalidArgumentError(f"TimedSample speed must be nonnegative, got {self.speed}")


@dataclass(frozen=True)
class BodyPoint:
    v: float
    x: float
    y: float

    def __post_init__(self):
        if not self.v >= 0.0:
            raise InvalidArgumentError(f"BodyPoint speed must be nonnegative, got {self.v}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    The 22 future waypoints (v, x, y) in the body frame of the pose they were generated at.
    Values are kept as a read-only (22, 3) float64 array.
    """
    values: np.ndarray
    dt: float = FRAME_DT

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (HORIZON, 3):
            raise InvalidArgumentError(f"A Trajectory holds exactly ({HORIZON}, 3) values, got {values.shape}")
        if not self.dt > 0:
            raise InvalidArgumentError(f"Trajectory dt must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(cls, points: Sequence[BodyPoint], dt: float = FRAME_DT) -> "Trajectory":
        return cls(np.array([[p.v, p.x, p.y] for p in points], dtype=np.float64), dt)

    @classmethod
    def from_prediction(cls, values, dt: float = FRAME_DT) -> "Trajectory":
        """Network outputs may carry slightly negative speeds; those are floored at 0"""
        values = np.array(values, dtype=np.float64).reshape(HORIZON, 3)
        values[:, 0] = np.maximum(values[:, 0], 0.0)
        return cls(values, dt)

    @property
    def points(self) -> List[BodyPoint]:
        return [BodyPoint(*map(float, row)) for row in self.values]

    @property
    def horizon(self) -> float:
        return HORIZON * self.dt

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.values, other.values)


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidArgumentError(f"Expected a list of (x, y) points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("Points must be finite")
    return arr


def world_to_body(points, ref: Pose2D) -> np.ndarray:
    """
    Express world points in the body frame of `ref`.

    EXAMPLE:    world_to_body([(1, 5)], Pose2D(1, 2, pi / 2)) -> [[0, 3]]

    :param points:  (N, 2) world coordinates
    :param ref:     Reference pose
    :return:        (N, 2) array of (lateral x, longitudinal y)
    """
    d = _as_points(points) - ref.position
    c, s = math.cos(ref.yaw), math.sin(ref.yaw)
    body = np.empty_like(d)
    body[:, 0] = d[:, 0] * s - d[:, 1] * c
    body[:, 1] = d[:, 0] * c + d[:, 1] * s
    return body


def body_to_world(points, ref: Pose2D) -> np.ndarray:
    """Exact inverse of world_to_body()"""
    b = _as_points(points)
    c, s = math.cos(ref.yaw), math.sin(ref.yaw)
    world = np.empty_like(b)
    world[:, 0] = ref.x + b[:, 1] * c + b[:, 0] * s
    world[:, 1] = ref.y + b[:, 1] * s - b[:, 0] * c
    return world


def interpolate_track(track: Sequence[TimedSample], query_times: Iterable[float]) -> List[TimedSample]:
    """
    Resample a track at the given times: positions and speeds linearly, yaw along the shorter arc.
    No extrapolation; a query at a knot returns that sample unchanged.

    :param track:       TimedSamples with strictly increasing t
    :param query_times: Times within [track[0].t, track[-1].t]
    :return:            One TimedSample per query time
    """
    if len(track) == 0:
        raise InvalidArgumentError("interpolate_track() needs a non-empty track")
    times = np.array([sample.t for sample in track], dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("Track times must be strictly increasing")

    out = []
    for q in query_times:
        q = float(q)
        if not times[0] <= q <= times[-1]:
            raise OutOfRangeError(f"Query time {q} outside the track span [{times[0]}, {times[-1]}]")
        i = int(np.searchsorted(times, q, side="right")) - 1
        if times[i] == q:
            out.append(track[i])
            continue
        a, b = track[i], track[i + 1]
        w = (q - a.t) / (b.t - a.t)
        yaw = a.pose.yaw + w * normalize_angle(b.pose.yaw - a.pose.yaw)
        pose = Pose2D(a.pose.x + w * (b.pose.x - a.pose.x), a.pose.y + w * (b.pose.y - a.pose.y), yaw)
        out.append(TimedSample(q, pose, a.speed + w * (b.speed - a.speed)))
    return out
