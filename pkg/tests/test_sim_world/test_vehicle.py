import math

import numpy as np
import pytest

from geometry import Pose2D
from sim_world import VehicleState, VehicleProfile, CAR, MOTORCYCLE, step_vehicle, get_profile, vehicle_footprint
from utils.exceptions import InvalidArgumentError


def test_straight_line_motion():
    state = step_vehicle(VehicleState(Pose2D(0, 0, 0), 5.0, 0.0), 0.0, 0.0, 0.1, CAR)
    assert state.pose.x == pytest.approx(0.5)
    assert state.pose.y == 0.0
    assert state.pose.yaw == 0.0
    assert state.speed == 5.0


def test_rest_is_a_fixed_point():
    start = VehicleState(Pose2D(3, 4, 1.0), 0.0, 0.0)
    state = start
    for _ in range(50):
        state = step_vehicle(state, 0.0, 0.0, 0.1, CAR)
    assert state == start


def test_constant_steer_circle_radius():
    delta, v, dt = 0.3, 5.0, 0.01
    expected = CAR.wheelbase / math.tan(delta)
    steps = int(2 * math.pi * expected / v / dt)
    state = VehicleState(Pose2D(0, 0, 0), v, 0.0)
    xy = []
    for _ in range(steps):
        state = step_vehicle(state, 0.0, delta, dt, CAR)
        xy.append((state.pose.x, state.pose.y))
    xy = np.array(xy)
    # algebraic circle fit: x^2 + y^2 + D x + E y + F = 0
    a = np.column_stack([xy, np.ones(len(xy))])
    d, e, f = np.linalg.lstsq(a, -(xy ** 2).sum(axis=1), rcond=None)[0]
    radius = math.sqrt(d * d / 4 + e * e / 4 - f)
    assert radius == pytest.approx(expected, rel=0.02)


def test_commands_clipped_to_profile():
    state = step_vehicle(VehicleState(Pose2D(0, 0, 0), 5.0, 0.0), 100.0, 2.0, 0.1, CAR)
    assert state.steer == CAR.max_steer
    assert state.speed == pytest.approx(5.0 + CAR.max_accel * 0.1)
    state = step_vehicle(VehicleState(Pose2D(0, 0, 0), 0.1, 0.0), -100.0, -2.0, 0.1, CAR)
    assert state.steer == -CAR.max_steer
    assert state.speed == 0.0


def test_zero_steer_keeps_heading():
    state = VehicleState(Pose2D(1, 1, 0.7), 8.0, 0.0)
    for accel in np.linspace(-3, 3, 30):
        nxt = step_vehicle(state, accel, 0.0, 0.05, CAR)
        assert nxt.pose.yaw == pytest.approx(0.7, abs=1e-12)
        d = nxt.pose.position - state.pose.position
        assert abs(d[0] * math.sin(0.7) - d[1] * math.cos(0.7)) < 1e-12
        assert nxt.speed >= 0.0
        state = nxt


@pytest.mark.parametrize('accel, steer, dt', [
    (float('nan'), 0.0, 0.1),
    (0.0, float('inf'), 0.1),
    (0.0, 0.0, 0.0),
])
def test_invalid_inputs(accel, steer, dt):
    with pytest.raises(InvalidArgumentError):
        step_vehicle(VehicleState(Pose2D(0, 0, 0), 1.0), accel, steer, dt, CAR)


def test_profiles():
    assert MOTORCYCLE.min_turning_radius < CAR.min_turning_radius
    assert MOTORCYCLE.max_accel > CAR.max_accel
    assert MOTORCYCLE.length < CAR.length and MOTORCYCLE.width < CAR.width
    assert get_profile("motorcycle") is MOTORCYCLE
    with pytest.raises(InvalidArgumentError):
        get_profile("truck")
    with pytest.raises(InvalidArgumentError):
        VehicleProfile("bad", 2.0, 1.6, 1.0, 1.0, 4.0, 2.0)
    with pytest.raises(InvalidArgumentError):
        VehicleProfile("bad", -2.0, 0.5, 1.0, 1.0, 4.0, 2.0)


def test_footprint_dimensions():
    corners = vehicle_footprint(VehicleState(Pose2D(0, 0, 0)), CAR)
    assert corners[:, 0].min() == pytest.approx(-CAR.rear_overhang)
    assert corners[:, 0].max() - corners[:, 0].min() == pytest.approx(CAR.length)
    assert corners[:, 1].max() - corners[:, 1].min() == pytest.approx(CAR.width)
