import numpy as np
import pytest

from sim_world import NoiseSchedule, inject_steer_noise
from utils.exceptions import InvalidArgumentError


def test_unchanged_before_first_window():
    schedule = NoiseSchedule.for_benchmark(seed=1)
    for t in np.linspace(0.0, 4.999, 50):
        assert inject_steer_noise(schedule, t, 0.1) == 0.1
    assert inject_steer_noise(None, 5.2, 0.1) == 0.1


def test_window_arithmetic():
    schedule = NoiseSchedule(period=5.0, duration_range=(0.6, 0.6), seed=2)
    offset = schedule.window(1).offset
    assert 0.15 <= abs(offset) <= 0.45
    assert inject_steer_noise(schedule, 5.0, 0.0) == offset
    assert inject_steer_noise(schedule, 5.59, 0.0) == offset
    assert inject_steer_noise(schedule, 5.6, 0.0) == 0.0
    assert inject_steer_noise(schedule, 10.0, 0.2) == pytest.approx(0.2 + schedule.window(2).offset)
    assert inject_steer_noise(schedule, 10.61, 0.2) == 0.2
    assert len(schedule.windows_until(60.0)) == 11


def test_noise_trace_reproducible():
    times = np.arange(0, 60.0, 3.0 / 22.0)
    a = [inject_steer_noise(NoiseSchedule.for_collection(seed=9), t, 0.0) for t in times]
    b = [inject_steer_noise(NoiseSchedule.for_collection(seed=9), t, 0.0) for t in times]
    c = [inject_steer_noise(NoiseSchedule.for_collection(seed=10), t, 0.0) for t in times]
    assert a == b
    assert a != c
    assert sum(1 for value in a if value != 0.0) > 0


def test_durations_within_range():
    schedule = NoiseSchedule.for_benchmark(seed=4)
    for window in schedule.windows_until(200.0):
        assert 0.2 <= window.duration <= 1.0
        assert window.start == window.index * 5.0


@pytest.mark.parametrize('period, durations, amplitudes', [
    (5.0, (0.0, 1.0), (0.1, 0.2)),
    (5.0, (1.0, 0.5), (0.1, 0.2)),
    (1.0, (0.2, 1.0), (0.1, 0.2)),
    (5.0, (0.2, 1.0), (0.3, 0.2)),
])
def test_invalid_schedules(period, durations, amplitudes):
    with pytest.raises(InvalidArgumentError):
        NoiseSchedule(period, durations, amplitudes)
