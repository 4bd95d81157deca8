import math

import numpy as np
import pytest

from geometry import Pose2D
from sim_world import check_collision, polygons_intersect, CollisionKind, Agent, AgentKind, footprint, CAR
from tests.world_builders import straight_world, lane_center_y


def parked_car(x, y, yaw=0.0, agent_id=7):
    return Agent(agent_id=agent_id, kind=AgentKind.VEHICLE, pose=Pose2D(x, y, yaw), speed=0.0,
                 length=4.5, width=1.9, height=1.5)


def test_centered_in_lane_without_agents():
    assert check_collision(straight_world()) is None


def test_agent_coincident_with_ego():
    world = straight_world(x=60.0, agents=[parked_car(61.35, lane_center_y())])
    event = check_collision(world)
    assert event.kind == CollisionKind.AGENT
    assert event.other_id == "vehicle-7"
    assert event.time == world.time


def test_agent_in_other_lane_is_clear():
    assert check_collision(straight_world(x=60.0, agents=[parked_car(61.35, 2.0)])) is None


def test_lateral_exit_is_off_road():
    shift = 4.0 / 2 + CAR.width / 2 + 0.01
    event = check_collision(straight_world(y=lane_center_y() - shift))
    assert event.kind == CollisionKind.OFF_ROAD
    assert check_collision(straight_world(y=lane_center_y() - 0.5)) is None


def random_box(rng):
    return footprint(Pose2D(*rng.uniform(-4, 4, size=2), rng.uniform(-math.pi, math.pi)),
                     rng.uniform(0.5, 5), rng.uniform(0.5, 2))


def test_intersection_symmetric_and_rigid_invariant():
    rng = np.random.default_rng(0)
    hits = 0
    for _ in range(500):
        a, b = random_box(rng), random_box(rng)
        result = polygons_intersect(a, b)
        assert result == polygons_intersect(b, a)
        angle = rng.uniform(-math.pi, math.pi)
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        shift = rng.uniform(-100, 100, size=2)
        assert polygons_intersect(a @ rot.T + shift, b @ rot.T + shift) == result
        hits += result
    assert 0 < hits < 500


@pytest.mark.parametrize('gap, expected', [(-0.1, True), (0.1, False)])
def test_touching_boxes(gap, expected):
    a = footprint(Pose2D(0, 0, 0), 2.0, 2.0)
    b = footprint(Pose2D(2.0 + gap, 0, 0), 2.0, 2.0)
    assert polygons_intersect(a, b) == expected
