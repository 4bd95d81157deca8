import math

import numpy as np
import pytest

from geometry import Pose2D
from sim_world import step_world, make_episode_world, make_vehicle, check_collision, CollisionKind, load_map, \
    plan_random_route, CAR, Weather, AgentKind
from tests.world_builders import straight_world
from utils import derive_rng
from utils.exceptions import InvalidArgumentError


def test_empty_world_only_ego_and_time_change():
    world = straight_world(speed=5.0)
    nxt = step_world(world, (0.0, 0.0), 0.1)
    assert nxt.time == pytest.approx(0.1)
    assert nxt.tick == 1
    assert nxt.ego.pose.x == pytest.approx(world.ego.pose.x + 0.5)
    assert (nxt.agents, nxt.weather, nxt.seed, nxt.profile) == (world.agents, world.weather, world.seed, world.profile)
    with pytest.raises(InvalidArgumentError):
        step_world(world, (0.0, 0.0), 0.0)


def test_determinism_over_1000_steps():
    network = load_map("town-a")
    route = plan_random_route(network, derive_rng(3, "route"), 400, 500)

    def run():
        world = make_episode_world(route, CAR, Weather.RAINY_DAY, seed=3, dynamic=True)
        for k in range(1000):
            world = step_world(world, (0.5 * math.sin(0.01 * k), 0.05 * math.cos(0.02 * k)), 3.0 / 22.0)
        return world

    a, b = run(), run()
    assert a == b
    assert a.ego.pose == b.ego.pose
    assert len(a.agents) > 0


def test_agent_progress_along_lane():
    agent = make_vehicle(0, np.array([[0.0, 148.0], [140.0, 148.0]]), speed=2.0)
    world = straight_world(x=100.0, agents=[agent])
    times = [world.time]
    for _ in range(50):
        world = step_world(world, (0.0, 0.0), 0.1)
        times.append(world.time)
    assert world.agents[0].progress == pytest.approx(10.0, abs=1e-6)
    assert world.agents[0].pose.x == pytest.approx(10.0, abs=1e-6)
    assert np.all(np.diff(times) > 0)


def test_vehicle_holds_behind_ego_and_retires_at_path_end():
    blocked = make_vehicle(0, np.array([[50.0, -2.0], [140.0, -2.0]]), speed=5.0)
    world = straight_world(x=55.0, agents=[blocked])
    world = step_world(world, (0.0, 0.0), 0.5)
    assert world.agents[0].progress == 0.0

    short = make_vehicle(1, np.array([[0.0, 148.0], [3.0, 148.0]]), speed=5.0)
    world = step_world(straight_world(agents=[short]), (0.0, 0.0), 1.0)
    assert not world.agents[0].active
    assert world.active_agents == ()


@pytest.mark.parametrize('seed', range(6))
def test_agents_never_spawn_on_the_ego(seed):
    network = load_map("town-a")
    route = plan_random_route(network, derive_rng(seed, "route"), 300, 1500)
    world = make_episode_world(route, CAR, "clear-day", seed=seed, dynamic=True)
    event = check_collision(world)
    assert event is None or event.kind != CollisionKind.AGENT
    kinds = [agent.kind for agent in world.agents]
    assert kinds.count(AgentKind.PEDESTRIAN) == int(round(6 * route.length / 1000.0))
    for agent in world.agents:
        assert np.linalg.norm(agent.pose.position - world.ego.pose.position) > 10.0


def test_pedestrian_crosses_and_returns():
    from sim_world import make_pedestrian
    walker = make_pedestrian(0, (60.0, -5.5), (60.0, 5.5), speed=1.0, wait=1.0)
    world = straight_world(x=10.0, agents=[walker])
    ys = []
    for _ in range(240):
        world = step_world(world, (0.0, 0.0), 0.1)
        ys.append(world.agents[0].pose.y)
    assert max(ys) == pytest.approx(5.5, abs=0.11)
    assert min(ys) == pytest.approx(-5.5, abs=0.11)
    assert world.agents[0].progress == pytest.approx(sum(abs(np.diff([-5.5] + ys))), abs=0.2)


def test_weather_parse():
    assert Weather.parse("Rainy_Sunset") == Weather.RAINY_SUNSET
    with pytest.raises(InvalidArgumentError):
        Weather.parse("snow")
