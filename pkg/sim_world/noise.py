import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

from utils.exceptions import InvalidArgumentError
from utils.utils import derive_rng

COLLECTION_PERIOD = 6.0
BENCHMARK_PERIOD = 5.0
DEFAULT_DURATION_RANGE = (0.2, 1.0)
DEFAULT_AMPLITUDE_RANGE = (0.15, 0.45)


@dataclass(frozen=True)
class NoiseWindow:
    index: int
    start: float
    duration: float
    offset: float

    @property
    def end(self) -> float:
        return self.start + self.duration

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Periodic steering disturbances. Window k (k >= 1) opens at k * period and lasts a duration
    drawn from duration_range; its additive steering offset is drawn once from amplitude_range
    with a random sign. Every window is drawn from its own stream, so the schedule is a pure
    function of (seed, k).
    """
    period: float
    duration_range: Tuple[float, float] = DEFAULT_DURATION_RANGE
    amplitude_range: Tuple[float, float] = DEFAULT_AMPLITUDE_RANGE
    seed: int = 0

    def __post_init__(self):
        d_min, d_max = self.duration_range
        a_min, a_max = self.amplitude_range
        if not 0 < d_min <= d_max < self.period:
            raise InvalidArgumentError(f"Noise durations must satisfy 0 < min <= max < period, got "
                                       f"{self.duration_range} with period {self.period}")
        if not 0 <= a_min <= a_max:
            raise InvalidArgumentError(f"Invalid noise amplitude range {self.amplitude_range}")
        object.__setattr__(self, "duration_range", (float(d_min), float(d_max)))
        object.__setattr__(self, "amplitude_range", (float(a_min), float(a_max)))

    @classmethod
    def for_collection(cls, seed: int, **kwargs) -> "NoiseSchedule":
        return cls(period=COLLECTION_PERIOD, seed=seed, **kwargs)

    @classmethod
    def for_benchmark(cls, seed: int, **kwargs) -> "NoiseSchedule":
        return cls(period=BENCHMARK_PERIOD, seed=seed, **kwargs)

    def window(self, k: int) -> NoiseWindow:
        if k < 1:
            raise InvalidArgumentError(f"Noise windows are numbered from 1, got {k}")
        return _draw_window(self, k)

    def active_window(self, t: float) -> Optional[NoiseWindow]:
        k = int(math.floor(t / self.period))
        if k < 1:
            return None
        window = self.window(k)
        return window if window.contains(t) else None

    def windows_until(self, t_end: float) -> List[NoiseWindow]:
        """Every window that opens before t_end"""
        return [self.window(k) for k in range(1, int(math.floor(t_end / self.period)) + 1)
                if k * self.period < t_end]


@lru_cache(maxsize=4096)
def _draw_window(schedule: NoiseSchedule, k: int) -> NoiseWindow:
    rng = derive_rng(schedule.seed, "steer-noise", k)
    duration = rng.uniform(*schedule.duration_range) if schedule.duration_range[0] < schedule.duration_range[1] \
        else schedule.duration_range[0]
    amplitude = rng.uniform(*schedule.amplitude_range)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return NoiseWindow(index=k, start=k * schedule.period, duration=float(duration), offset=float(sign * amplitude))


def inject_steer_noise(schedule: Optional[NoiseSchedule], t: float, steer_cmd: float) -> float:
    """
    Steering command with the schedule's disturbance applied.

    :param schedule:    Noise schedule, or None for a noise-free run
    :param t:           Episode time, seconds
    :param steer_cmd:   Steering requested by the driver
    :return:            steer_cmd plus the active window's offset, or steer_cmd unchanged outside windows
    """
    if schedule is None:
        return steer_cmd
    window = schedule.active_window(t)
    return steer_cmd if window is None else steer_cmd + window.offset

