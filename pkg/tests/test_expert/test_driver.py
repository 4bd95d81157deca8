import math

import pytest

from expert import expert_controls, expert_action, ExpertDriver, ExpertConfig, TARGET_SPEED
from geometry import FRAME_DT
from sim_world import make_pedestrian, step_world, CAR
from tests.world_builders import grid_network, straight_route, straight_world, lane_center_y
from utils.exceptions import ExpertLostError


@pytest.fixture(scope="module")
def route():
    return straight_route(grid_network())


def test_steady_state_on_straight_road(route):
    world = straight_world(x=60.0, speed=TARGET_SPEED)
    accel, steer = expert_controls(world, route)
    assert abs(steer) < 0.02
    assert accel == pytest.approx(0.0, abs=1e-9)


def test_brakes_for_pedestrian_in_corridor(route):
    pedestrian = make_pedestrian(0, (70.0, lane_center_y()), (70.0, 10.0), speed=1.4, wait=100.0)
    world = straight_world(x=60.0, speed=5.0, agents=[pedestrian])
    action = expert_action(world, route)
    assert action.blocked
    assert action.accel == -CAR.max_decel


def test_ignores_pedestrian_on_sidewalk(route):
    pedestrian = make_pedestrian(0, (70.0, -12.0), (70.0, 10.0), speed=1.4, wait=100.0)
    world = straight_world(x=60.0, speed=5.0, agents=[pedestrian])
    assert not expert_action(world, route).blocked


def test_lateral_offset_decays(route):
    world = straight_world(x=40.0, y=lane_center_y() - 1.0, speed=TARGET_SPEED)
    driver = ExpertDriver(route)
    first = driver.act(world)
    assert first.lateral == pytest.approx(1.0, abs=1e-6)
    assert first.steer > 0                  # back to the left, toward the centerline
    for _ in range(int(math.ceil(4.0 / FRAME_DT))):
        action = driver.act(world)
        world = step_world(world, (action.accel, action.steer), FRAME_DT)
    assert abs(driver.act(world).lateral) < 0.1


def test_lost_expert_raises(route):
    world = straight_world(x=60.0, y=lane_center_y() + 5.0)
    with pytest.raises(ExpertLostError):
        expert_controls(world, route)


def test_lookahead_is_clamped():
    config = ExpertConfig()
    assert config.lookahead(0.0) == 3.0
    assert config.lookahead(5.0) == 3.0
    assert config.lookahead(20.0) == pytest.approx(5.2)
    assert config.lookahead(60.0) == 12.0


def test_controls_within_profile_limits(route):
    world = straight_world(x=60.0, y=lane_center_y() - 3.0, speed=0.0)
    accel, steer = expert_controls(world, route)
    assert -CAR.max_decel <= accel <= CAR.max_accel
    assert abs(steer) <= CAR.max_steer
